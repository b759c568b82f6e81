#include <string>

#include "json_io.hpp"
#include "rffpsr/text.hpp"
#include "rffpsr/two_stage.hpp"

namespace rffpsr {

using detail::field;
using detail::Json;

namespace {

constexpr const char* kModelFormat = "rffpsr-model-1";

Json hyper_to_json(const Hyperparams& hp) {
  Json j{{"k", hp.spec.k},
         {"history_len", hp.spec.history_len},
         {"num_freq", hp.features.num_freq},
         {"pca_dim", hp.features.pca_dim},
         {"obs_kind", to_string(hp.features.obs_kind)},
         {"act_kind", to_string(hp.features.act_kind)},
         {"history_kind", to_string(hp.features.history_kind)},
         {"feature_seed", hp.features.seed},
         {"max_pairs", hp.features.max_pairs},
         {"bandwidth_scale", hp.features.bandwidth_scale},
         {"s1", to_string(hp.s1)},
         {"lambda1", hp.lambda1},
         {"lambda2", hp.lambda2},
         {"state_dim", hp.state_dim},
         {"q0_min_trajectories", hp.q0_min_trajectories},
         {"seed", hp.seed}};
  j["lambda_filter"] = hp.lambda_filter ? Json(*hp.lambda_filter) : Json(nullptr);
  return j;
}

Hyperparams hyper_from_json(const Json& j) {
  Hyperparams hp;
  hp.spec.k = field(j, "k").get<int>();
  hp.spec.history_len = field(j, "history_len").get<int>();
  hp.features.num_freq = field(j, "num_freq").get<Eigen::Index>();
  hp.features.pca_dim = field(j, "pca_dim").get<Eigen::Index>();
  hp.features.obs_kind = feature_kind_from_string(field(j, "obs_kind").get<std::string>());
  hp.features.act_kind = feature_kind_from_string(field(j, "act_kind").get<std::string>());
  hp.features.history_kind = feature_kind_from_string(field(j, "history_kind").get<std::string>());
  hp.features.seed = field(j, "feature_seed").get<std::uint64_t>();
  hp.features.max_pairs = field(j, "max_pairs").get<std::size_t>();
  hp.features.bandwidth_scale = j.value("bandwidth_scale", 1.0);
  hp.s1 = s1_mode_from_string(field(j, "s1").get<std::string>());
  hp.lambda1 = field(j, "lambda1").get<double>();
  hp.lambda2 = field(j, "lambda2").get<double>();
  hp.state_dim = field(j, "state_dim").get<Eigen::Index>();
  hp.q0_min_trajectories = field(j, "q0_min_trajectories").get<std::size_t>();
  hp.seed = field(j, "seed").get<std::uint64_t>();
  const Json& lf = field(j, "lambda_filter");
  if (!lf.is_null()) hp.lambda_filter = lf.get<double>();
  return hp;
}

}  // namespace

std::string model_to_json(const RffPsrModel& m) {
  const FeatureSet& fs = m.features;
  Json features{{"k", fs.spec.k},
                {"history_len", fs.spec.history_len},
                {"obs_dim", fs.obs_dim},
                {"act_dim", fs.act_dim},
                {"history", detail::projected_to_json(fs.history)},
                {"obs", detail::projected_to_json(fs.obs)},
                {"act", detail::projected_to_json(fs.act)},
                {"fut_obs", detail::projected_to_json(fs.fut_obs)},
                {"fut_act", detail::projected_to_json(fs.fut_act)},
                {"xi_obs", detail::mat_to_json(fs.xi_obs.basis())},
                {"xi_act", detail::mat_to_json(fs.xi_act.basis())},
                {"obs_pair", detail::mat_to_json(fs.obs_pair.basis())}};
  Json j{{"format", kModelFormat},
         {"init", m.init},
         {"hyperparams", hyper_to_json(m.hp)},
         {"lambda_filter", m.lambda_filter},
         {"clip_covariance", m.clip_covariance},
         {"features", std::move(features)},
         {"state_proj", detail::mat_to_json(m.state_proj.basis())},
         {"w_xi", detail::mat_to_json(m.w_xi)},
         {"w_o", detail::mat_to_json(m.w_o)},
         {"w_pred", detail::mat_to_json(m.w_pred)},
         {"q0", detail::vec_to_json(m.q0)}};
  return j.dump() + "\n";
}

RffPsrModel model_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (field(j, "format").get<std::string>() != kModelFormat)
      throw ParseError("unsupported model format");
    RffPsrModel m;
    m.init = field(j, "init").get<std::string>();
    m.hp = hyper_from_json(field(j, "hyperparams"));
    m.lambda_filter = field(j, "lambda_filter").get<double>();
    m.clip_covariance = field(j, "clip_covariance").get<bool>();
    const Json& f = field(j, "features");
    FeatureSet& fs = m.features;
    fs.spec.k = field(f, "k").get<int>();
    fs.spec.history_len = field(f, "history_len").get<int>();
    fs.spec.validate();
    fs.obs_dim = field(f, "obs_dim").get<Eigen::Index>();
    fs.act_dim = field(f, "act_dim").get<Eigen::Index>();
    fs.history = detail::projected_from_json(field(f, "history"));
    fs.obs = detail::projected_from_json(field(f, "obs"));
    fs.act = detail::projected_from_json(field(f, "act"));
    fs.fut_obs = detail::projected_from_json(field(f, "fut_obs"));
    fs.fut_act = detail::projected_from_json(field(f, "fut_act"));
    fs.xi_obs = PcaProjector(detail::mat_from_json(field(f, "xi_obs")));
    fs.xi_act = PcaProjector(detail::mat_from_json(field(f, "xi_act")));
    fs.obs_pair = PcaProjector(detail::mat_from_json(field(f, "obs_pair")));
    m.state_proj = PcaProjector(detail::mat_from_json(field(j, "state_proj")));
    m.w_xi = detail::mat_from_json(field(j, "w_xi"));
    m.w_o = detail::mat_from_json(field(j, "w_o"));
    m.w_pred = detail::mat_from_json(field(j, "w_pred"));
    m.q0 = detail::vec_from_json(field(j, "q0"));
    m.validate();
    return m;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string("inconsistent model file: ") + e.what());
  }
}

void save_model(const RffPsrModel& m, const std::string& path) { write_file(path, model_to_json(m)); }

RffPsrModel load_model(const std::string& path) { return model_from_json(read_file(path)); }

}  // namespace rffpsr
