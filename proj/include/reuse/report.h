#ifndef REUSE_REPORT_H_
#define REUSE_REPORT_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reuse/similarity.h"

namespace reuse {

// Capture dump: one JSON header line
//   {"format":"reuse-capture","version":1,"L":..,"H":..,"n":..,"T":..,"layer_ids":[..]}
// then T*L*H blocks of n*n little-endian float64 in (t, l, h) order, row-major.
inline constexpr int kCaptureVersion = 1;

std::string encode_capture(const AttentionCapture& capture);
AttentionCapture decode_capture(std::string_view bytes);
void save_capture(const std::filesystem::path& path, const AttentionCapture& capture);
AttentionCapture load_capture(const std::filesystem::path& path);

nlohmann::json matrix_to_json(const Tensor2D& m);
nlohmann::json similarity_report_json(const SimilarityReport& report);

// Header "source_layer,target_0,..", one row per source layer.
std::string all_pairs_csv(const Tensor2D& all_pairs, const std::vector<int>& layer_ids);
// Header "layer,rank_1,..,rank_H".
std::string adjacent_profiles_csv(const std::vector<std::vector<double>>& profiles,
                                  const std::vector<int>& layer_ids);
// Long format: "examples,source_layer,target_layer,similarity".
std::string convergence_csv(const std::vector<ConvergencePoint>& points,
                            const std::vector<int>& layer_ids);

// Annotated heatmap of an all-pairs table; values outside [0, 1] are clamped for colour only.
std::string heatmap_svg(const Tensor2D& all_pairs, const std::vector<int>& layer_ids,
                        std::string_view title);

}  // namespace reuse

#endif  // REUSE_REPORT_H_
