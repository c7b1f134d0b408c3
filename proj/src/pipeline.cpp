#include "compc/pipeline.hpp"

#include <spdlog/spdlog.h>

#include "compc/bridge.hpp"
#include "compc/error.hpp"
#include "compc/sampling.hpp"

namespace compc {

ProviderFactory oracle_factory(PointCloud ground_truth) {
  return [gt = std::move(ground_truth)](const Similarity& t) -> std::unique_ptr<GuidanceProvider> {
    return make_oracle(t.apply(gt));
  };
}

ProviderFactory bridge_factory() {
  return [](const Similarity&) -> std::unique_ptr<GuidanceProvider> { return std::make_unique<BridgeProvider>(); };
}

CompletionResult complete_point_cloud(const PointCloud& p_in, const ProviderFactory& provider,
                                      const CompletionConfig& cfg) {
  p_in.validate();
  require(cfg.resolution >= 1, "complete: resolution must be >= 1");
  CompletionResult res;
  auto [work, t] = normalize_unit_box(p_in);
  res.normalization = t;

  zfc::ZfcConfig zcfg = cfg.zfc;
  zcfg.seed = cfg.seed;
  pce::PceConfig pcfg = cfg.pce;
  pcfg.pulling.seed = cfg.seed;

  auto guidance = provider(t);
  spdlog::info("completion: {} input points, guidance {}", work.size(), guidance->name());
  res.zfc = zfc::run_zfc(work, *guidance, zcfg);
  const GaussianSet sets[] = {res.zfc.g_in, res.zfc.g_m};
  res.pce = pce::run_pce(sets, work.points, pcfg);

  std::vector<Vec3> out = res.pce.p_out.points;
  if (out.size() > cfg.resolution) out = farthest_point_sample(out, cfg.resolution, cfg.seed);
  res.p_out = t.invert(PointCloud(std::move(out)));

  if (cfg.build_mesh) {
    pce::TriangleMesh mesh = pce::marching_cubes_mesh(res.pce.fit.network, res.pce.grid);
    for (auto& v : mesh.vertices) v = t.invert(v);
    res.mesh = std::move(mesh);
  }
  return res;
}

}  // namespace compc
