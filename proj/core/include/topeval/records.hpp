#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "topeval/intrusion.hpp"

namespace topeval {

// Line-delimited JSON records. The first line of each file is a header
// {"format": <kind>, "version": 1, "config_hash": ...}; see docs/formats.md.
inline constexpr int kRecordVersion = 1;

std::string header_line(std::string_view kind, std::string_view config_hash);
// Comment header for tab-separated outputs: "#<kind>\t<version>\t<hash>".
std::string tsv_header(std::string_view kind, std::string_view config_hash);

std::string item_to_line(const IntrusionItem& item);
IntrusionItem item_from_line(std::string_view line);

std::string annotation_to_line(const AnnotationRecord& rec);
AnnotationRecord annotation_from_line(std::string_view line);
std::string rating_to_line(const RatingRecord& rec);
RatingRecord rating_from_line(std::string_view line);

void save_items(const std::filesystem::path& path, const std::vector<IntrusionItem>& items,
                std::string_view config_hash);
std::vector<IntrusionItem> load_items(const std::filesystem::path& path);

void save_hits(const std::filesystem::path& path, const std::vector<Hit>& hits,
               std::string_view config_hash);
std::vector<Hit> load_hits(const std::filesystem::path& path);

void save_annotations(const std::filesystem::path& path,
                      const std::vector<AnnotationRecord>& records, std::string_view config_hash);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

void save_ratings(const std::filesystem::path& path, const std::vector<RatingRecord>& records,
                  std::string_view config_hash);
std::vector<RatingRecord> load_ratings(const std::filesystem::path& path);

// Reads all record lines after the header of the expected kind.
std::vector<std::string> read_record_lines(const std::filesystem::path& path,
                                           std::string_view kind);

// Writes via a temporary sibling and rename so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace topeval
