#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "topeval/config.hpp"
#include "topeval/error.hpp"

namespace topeval {

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct StageOutcome {
  std::string stage;
  bool skipped = false;  // outputs already current
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> notes;
};

// Stage-per-step driver over an output directory. A stage records a stamp
// (config hash plus a fingerprint of its inputs) after writing all outputs;
// a rerun with a matching stamp is a no-op. A failing stage leaves a
// <stage>.incomplete marker next to the stamps.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config);

  StageOutcome ingest();
  StageOutcome index();
  StageOutcome models();
  StageOutcome coherence();
  StageOutcome gen_intrusion();
  StageOutcome score_human();
  StageOutcome autoeval_train();
  StageOutcome autoeval_predict();
  StageOutcome report();

  std::vector<StageOutcome> run_all();

  const RunConfig& config() const { return config_; }
  std::filesystem::path out(std::string_view name) const;
  // Model files the later stages read: configured models plus the cluster
  // baseline when it is enabled.
  std::vector<std::filesystem::path> model_paths() const;

 private:
  template <typename Fn>
  StageOutcome run_stage(const std::string& name, const std::vector<std::filesystem::path>& inputs,
                         Fn&& body);

  RunConfig config_;
  std::string hash_;
};

}  // namespace topeval
