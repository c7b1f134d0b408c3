#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "compc/guidance.hpp"
#include "compc/pce.hpp"
#include "compc/point_cloud.hpp"
#include "compc/zfc.hpp"

namespace compc {

struct CompletionConfig {
  zfc::ZfcConfig zfc;
  pce::PceConfig pce;
  std::size_t resolution = 16384;  // |P_out| after the final farthest-point sampling
  bool build_mesh = false;
  std::uint64_t seed = 0;           // overrides the seeds of both stages
};

struct CompletionResult {
  PointCloud p_out;          // input frame
  Similarity normalization;  // input frame -> working frame
  zfc::ZfcResult zfc;        // working frame
  pce::PceResult pce;        // working frame
  std::optional<pce::TriangleMesh> mesh;  // input frame
};

// Receives the normalisation so a ground-truth oracle can be moved into the
// working frame.
using ProviderFactory = std::function<std::unique_ptr<GuidanceProvider>(const Similarity& normalization)>;

ProviderFactory oracle_factory(PointCloud ground_truth);
ProviderFactory bridge_factory();

// normalize -> reference view and completion -> extraction -> resample -> denormalize.
CompletionResult complete_point_cloud(const PointCloud& p_in, const ProviderFactory& provider,
                                      const CompletionConfig& cfg);

}  // namespace compc
