#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lingermort/core/errors.hpp"
#include "lingermort/core/parallel.hpp"
#include "lingermort/core/rng.hpp"
#include "lingermort/data/axes.hpp"
#include "lingermort/data/descriptive.hpp"
#include "lingermort/estimation/fit.hpp"
#include "lingermort/io/csv.hpp"
#include "lingermort/io/files.hpp"
#include "lingermort/io/json_util.hpp"
#include "lingermort/model/kernel.hpp"
#include "lingermort/model/params.hpp"

namespace lingermort {

// ---------------------------------------------------------------------------
// Jump bookkeeping

struct JumpEvent {
  int year = 0;
  Eigen::MatrixXd severity;  // ages x causes, log-rate shift in the event year
  LingeringKernel kernel;
};

/// Active jump events of one path. Contributions of distinct events add on
/// the log scale, each with its own elapsed-time clock.
class JumpState {
 public:
  void add(JumpEvent e) { events_.push_back(std::move(e)); }

  const std::vector<JumpEvent>& events() const { return events_; }

  /// Sum of severity * weight(c, year - event year) over events.
  Eigen::MatrixXd contribution(int year, long ages, long causes) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ages, causes);
    for (const auto& e : events_)
      for (long c = 0; c < causes; ++c) {
        const double w = e.kernel.weight(static_cast<std::size_t>(c), year - e.year);
        if (w != 0.0) out.col(c) += w * e.severity.col(c);
      }
    return out;
  }

 private:
  std::vector<JumpEvent> events_;
};

// ---------------------------------------------------------------------------
// Scenarios

enum class ShockKind { Permanent, Transitory, Lingering };

inline std::string_view shock_kind_name(ShockKind k) {
  switch (k) {
    case ShockKind::Permanent: return "permanent";
    case ShockKind::Transitory: return "transitory";
    case ShockKind::Lingering: return "lingering";
  }
  return "?";
}

inline ShockKind parse_shock_kind(std::string_view s) {
  if (s == "permanent") return ShockKind::Permanent;
  if (s == "transitory") return ShockKind::Transitory;
  if (s == "lingering") return ShockKind::Lingering;
  throw Error(ErrorCode::InvalidScenario, "unknown shock kind '" + std::string(s) + "'");
}

struct InjectedShock {
  ShockKind kind = ShockKind::Transitory;
  std::vector<std::size_t> causes;  // cause indices; empty means all
  std::optional<int> age_from;      // single-age range, inclusive; bands are
  std::optional<int> age_to;        // selected by their midpoint
  double log_shift = 0.0;
  double probability = 0.0;         // per projection year
  std::optional<std::uint64_t> stream;  // random stream id; defaults to the position
};

struct ScenarioSpec {
  std::string name = "baseline";
  std::optional<double> p_override;
  double frequency_scale = 1.0;   // multiplies the fitted p when there is no override
  double severity_scale = 1.0;    // multiplies the mean severity of new events
  double lingering_scale = 1.0;   // multiplies the kernel magnitude of new events
  bool retain_insample_decay = true;
  std::vector<InjectedShock> injected;

  void validate() const {
    auto prob = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
    require(!p_override || prob(*p_override), ErrorCode::InvalidScenario,
            "jump probability override outside [0,1]");
    require(std::isfinite(frequency_scale) && frequency_scale >= 0.0, ErrorCode::InvalidScenario,
            "frequency scale must be non-negative");
    require(std::isfinite(severity_scale) && std::isfinite(lingering_scale),
            ErrorCode::InvalidScenario, "non-finite scale");
    for (const auto& s : injected) {
      require(prob(s.probability), ErrorCode::InvalidScenario, "shock probability outside [0,1]");
      require(std::isfinite(s.log_shift), ErrorCode::InvalidScenario, "non-finite shock size");
      require(!s.age_from || !s.age_to || *s.age_from <= *s.age_to, ErrorCode::InvalidScenario,
              "shock age range reversed");
    }
  }

  /// Annual probability of a new lingering event.
  double event_probability(double fitted_p) const {
    const double p = p_override ? *p_override : frequency_scale * fitted_p;
    require(std::isfinite(p) && p >= 0.0 && p <= 1.0, ErrorCode::InvalidScenario,
            "scenario jump probability outside [0,1]");
    return p;
  }
};

/// Named what-if scenarios. Causes are indexed in the six-group order
/// (infectious, cancer, circulatory, respiratory, external, other).
inline ScenarioSpec make_scenario(std::string_view name) {
  ScenarioSpec s;
  s.name = std::string(name);
  if (name == "baseline") return s;
  if (name == "I") {
    s.p_override = 0.0;
    return s;
  }
  if (name == "II") {
    s.frequency_scale = 4.0;
    s.severity_scale = 0.5;
    return s;
  }
  if (name == "III") {
    InjectedShock shock;
    shock.kind = ShockKind::Permanent;
    shock.causes = {1};
    shock.log_shift = std::log(0.5);
    shock.probability = 0.01;
    s.injected.push_back(shock);
    return s;
  }
  if (name == "IV") {
    InjectedShock shock;
    shock.kind = ShockKind::Transitory;
    shock.causes = {4};
    shock.age_from = 35;
    shock.age_to = 64;
    shock.log_shift = std::log(10.0);
    shock.probability = 0.01;
    s.injected.push_back(shock);
    return s;
  }
  throw Error(ErrorCode::UnknownScenario, "unknown scenario '" + std::string(name) + "'");
}

inline io::json to_json(const ScenarioSpec& s) {
  io::json j;
  j["name"] = s.name;
  j["p_override"] = s.p_override ? io::json(io::hex_double(*s.p_override)) : io::json(nullptr);
  j["frequency_scale"] = io::hex_double(s.frequency_scale);
  j["severity_scale"] = io::hex_double(s.severity_scale);
  j["lingering_scale"] = io::hex_double(s.lingering_scale);
  j["retain_insample_decay"] = s.retain_insample_decay;
  j["injected"] = io::json::array();
  for (const auto& k : s.injected) {
    io::json e;
    e["kind"] = std::string(shock_kind_name(k.kind));
    e["causes"] = k.causes;
    e["age_from"] = k.age_from ? io::json(*k.age_from) : io::json(nullptr);
    e["age_to"] = k.age_to ? io::json(*k.age_to) : io::json(nullptr);
    e["log_shift"] = io::hex_double(k.log_shift);
    e["probability"] = io::hex_double(k.probability);
    e["stream"] = k.stream ? io::json(*k.stream) : io::json(nullptr);
    j["injected"].push_back(e);
  }
  return j;
}

inline ScenarioSpec scenario_from_json(const io::json& j) {
  ScenarioSpec s;
  s.name = io::field(j, "name").get<std::string>();
  if (!io::field(j, "p_override").is_null()) s.p_override = io::parse_hex_double(j["p_override"]);
  s.frequency_scale = io::parse_hex_double(io::field(j, "frequency_scale"));
  s.severity_scale = io::parse_hex_double(io::field(j, "severity_scale"));
  s.lingering_scale = io::parse_hex_double(io::field(j, "lingering_scale"));
  s.retain_insample_decay = io::field(j, "retain_insample_decay").get<bool>();
  for (const auto& e : io::field(j, "injected")) {
    InjectedShock k;
    k.kind = parse_shock_kind(io::field(e, "kind").get<std::string>());
    k.causes = io::field(e, "causes").get<std::vector<std::size_t>>();
    if (!io::field(e, "age_from").is_null()) k.age_from = e["age_from"].get<int>();
    if (!io::field(e, "age_to").is_null()) k.age_to = e["age_to"].get<int>();
    k.log_shift = io::parse_hex_double(io::field(e, "log_shift"));
    k.probability = io::parse_hex_double(io::field(e, "probability"));
    if (!io::field(e, "stream").is_null()) k.stream = e["stream"].get<std::uint64_t>();
    s.injected.push_back(k);
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Ensembles

struct ProjectionConfig {
  std::size_t horizon = 60;
  std::size_t paths = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  bool include_noise = false;       // add measurement noise to projected log rates
  bool allow_nonconverged = false;  // project from a fit whose optimizer did not converge
};

inline io::json to_json(const ProjectionConfig& c) {
  return {{"horizon", c.horizon},
          {"paths", c.paths},
          {"seed", c.seed},
          {"include_noise", c.include_noise},
          {"allow_nonconverged", c.allow_nonconverged}};
}

/// Simulated rates, stored per (path, year) as an ages x causes block.
struct ProjectionEnsemble {
  std::vector<std::string> age_labels;
  std::vector<std::string> cause_labels;
  std::vector<double> age_midpoints;
  int first_year = 0;  // first projected calendar year
  std::size_t paths = 0;
  std::size_t horizon = 0;
  std::vector<double> data;
  ProjectionConfig config;
  ScenarioSpec scenario;

  long ages() const { return static_cast<long>(age_labels.size()); }
  long causes() const { return static_cast<long>(cause_labels.size()); }
  int last_year() const { return first_year + static_cast<int>(horizon) - 1; }

  void allocate() {
    data.assign(paths * horizon * static_cast<std::size_t>(ages() * causes()), 0.0);
  }

  Eigen::Map<Eigen::MatrixXd> rates(std::size_t path, std::size_t h) {
    return {data.data() + block(path, h), ages(), causes()};
  }
  Eigen::Map<const Eigen::MatrixXd> rates(std::size_t path, std::size_t h) const {
    return {data.data() + block(path, h), ages(), causes()};
  }
  double rate(std::size_t path, std::size_t h, long x, long c) const {
    return data[block(path, h) + static_cast<std::size_t>(c * ages() + x)];
  }

 private:
  std::size_t block(std::size_t path, std::size_t h) const {
    return (path * horizon + h) * static_cast<std::size_t>(ages() * causes());
  }
};

namespace detail {

inline Eigen::MatrixXd shock_mask(const InjectedShock& s, const std::vector<double>& mids,
                                  long causes) {
  const long X = static_cast<long>(mids.size());
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(X, causes);
  std::vector<std::size_t> cs = s.causes;
  if (cs.empty())
    for (long c = 0; c < causes; ++c) cs.push_back(static_cast<std::size_t>(c));
  for (std::size_t c : cs) {
    require(c < static_cast<std::size_t>(causes), ErrorCode::InvalidScenario,
            "shock cause index " + std::to_string(c) + " out of range");
    for (long x = 0; x < X; ++x) {
      const double m = mids[static_cast<std::size_t>(x)];
      const bool in = (!s.age_from || m >= *s.age_from) && (!s.age_to || m < *s.age_to + 1);
      if (in) mask(x, static_cast<long>(c)) = 1.0;
    }
  }
  require(mask.sum() > 0.0, ErrorCode::InvalidScenario, "shock selects no age-cause cell");
  return mask;
}

}  // namespace detail

/// Simulates future rates from the last fitted year. Each path evolves the
/// common and cause-specific indices as random walks, keeps the in-sample
/// jump's remaining decay at its fitted mean, draws new lingering events,
/// and applies injected shocks. Streams are keyed by (seed, path, year,
/// purpose), so the ensemble is independent of the thread count.
inline ProjectionEnsemble project(const FitResult& fit, const ProjectionConfig& cfg,
                                  const ScenarioSpec& scenario = {}) {
  require(cfg.horizon >= 1, ErrorCode::InvalidArgument, "projection horizon must be at least 1");
  require(cfg.paths >= 1, ErrorCode::InvalidArgument, "projection needs at least one path");
  require(fit.converged || cfg.allow_nonconverged, ErrorCode::NonConvergedFit,
          "fit did not converge (" + fit.stop_reason + ")");
  scenario.validate();
  const ParamSet& th = fit.theta_hat;
  th.validate();
  const long X = static_cast<long>(th.ages()), C = static_cast<long>(th.causes());
  require(fit.jump_off_log_rates.rows() == X && fit.jump_off_log_rates.cols() == C,
          ErrorCode::DimensionMismatch, "jump-off rates do not match the parameters");
  require(static_cast<long>(th.age_labels.size()) == X, ErrorCode::DimensionMismatch,
          "fit carries no age labels");

  ProjectionEnsemble out;
  out.age_labels = th.age_labels;
  out.cause_labels = th.cause_labels;
  if (static_cast<long>(out.cause_labels.size()) != C) {
    out.cause_labels.clear();
    for (long c = 0; c < C; ++c) out.cause_labels.push_back("cause" + std::to_string(c + 1));
  }
  out.age_midpoints = AgeAxis::from_labels(th.age_labels).midpoints();
  out.first_year = fit.last_year + 1;
  out.paths = cfg.paths;
  out.horizon = cfg.horizon;
  out.config = cfg;
  out.scenario = scenario;
  out.allocate();

  const double p_new = scenario.event_probability(th.p);
  LingeringKernel new_kernel = th.kernel;
  new_kernel.gamma *= scenario.lingering_scale;
  std::vector<Eigen::MatrixXd> masks;
  for (const auto& s : scenario.injected) masks.push_back(detail::shock_mask(s, out.age_midpoints, C));

  const int T0 = fit.last_year;
  const bool decay = scenario.retain_insample_decay && fit.jump_year.has_value();
  // remaining in-sample decay relative to the jump-off year
  std::vector<Eigen::MatrixXd> retained(cfg.horizon, Eigen::MatrixXd::Zero(X, C));
  if (decay)
    for (std::size_t h = 0; h < cfg.horizon; ++h)
      for (long c = 0; c < C; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        const int year = T0 + static_cast<int>(h) + 1;
        const double dw = th.kernel.weight(cc, year - *fit.jump_year) - th.kernel.weight(cc, T0 - *fit.jump_year);
        retained[h].col(c) = th.mu.col(c) * dw;
      }
  const Eigen::MatrixXd cause_loading = th.b * th.phi.transpose();

  parallel_for(cfg.paths, cfg.threads, [&](std::size_t path) {
    double K = 0.0, k = 0.0;
    JumpState events, lingering_shocks;
    Eigen::MatrixXd permanent = Eigen::MatrixXd::Zero(X, C);
    for (std::size_t h = 0; h < cfg.horizon; ++h) {
      const std::uint64_t step = h + 1;
      const int year = T0 + static_cast<int>(step);
      CounterRng common(cfg.seed, path, step, static_cast<std::uint64_t>(StreamPurpose::CommonTrend));
      CounterRng cause(cfg.seed, path, step, static_cast<std::uint64_t>(StreamPurpose::CauseTrend));
      K += th.drift_K + th.sigma_eta * common.normal();
      k += th.drift_k + th.sigma_xi * cause.normal();

      CounterRng occur(cfg.seed, path, step, static_cast<std::uint64_t>(StreamPurpose::JumpOccurrence));
      if (occur.bernoulli(p_new)) {
        CounterRng sev(cfg.seed, path, step, static_cast<std::uint64_t>(StreamPurpose::JumpSeverity));
        Eigen::MatrixXd J(X, C);
        for (long c = 0; c < C; ++c)
          for (long x = 0; x < X; ++x)
            J(x, c) = scenario.severity_scale * th.mu(x, c) + th.sigma_J * sev.normal();
        events.add({year, std::move(J), new_kernel});
      }

      Eigen::MatrixXd transitory = Eigen::MatrixXd::Zero(X, C);
      for (std::size_t i = 0; i < scenario.injected.size(); ++i) {
        const auto& s = scenario.injected[i];
        const std::uint64_t id = s.stream.value_or(i);
        CounterRng draw(cfg.seed, path, step,
                        static_cast<std::uint64_t>(StreamPurpose::InjectedShockBase) + id);
        if (!draw.bernoulli(s.probability)) continue;
        switch (s.kind) {
          case ShockKind::Permanent: permanent += s.log_shift * masks[i]; break;
          case ShockKind::Transitory: transitory += s.log_shift * masks[i]; break;
          case ShockKind::Lingering: lingering_shocks.add({year, s.log_shift * masks[i], th.kernel}); break;
        }
      }

      Eigen::MatrixXd lm = fit.jump_off_log_rates;
      lm.colwise() += th.B * K;
      lm += k * cause_loading;
      lm += retained[h] + permanent + transitory;
      if (!events.events().empty()) lm += events.contribution(year, X, C);
      if (!lingering_shocks.events().empty()) lm += lingering_shocks.contribution(year, X, C);
      if (cfg.include_noise) {
        CounterRng noise(cfg.seed, path, step, static_cast<std::uint64_t>(StreamPurpose::Noise));
        for (long c = 0; c < C; ++c)
          for (long x = 0; x < X; ++x) lm(x, c) += th.sigma_e * noise.normal();
      }
      out.rates(path, h) = lm.array().exp().matrix();
    }
  });
  return out;
}

/// Survival of a life aged `age` at the end of year t0 along one path:
/// S(0) = 1 and S(s) = exp(-sum_{u<=s} sum_c m_{age+u-1, t0+u, c}), with
/// single-age hazards interpolated from the band rates.
inline std::vector<double> survival_curve(const ProjectionEnsemble& e, std::size_t path, int age,
                                          int t0, int T) {
  require(path < e.paths, ErrorCode::InvalidArgument, "path index out of range");
  require(T >= 0, ErrorCode::InvalidArgument, "negative survival horizon");
  require(t0 + 1 >= e.first_year && t0 + T <= e.last_year(), ErrorCode::HorizonExceedsPath,
          "survival years " + std::to_string(t0 + 1) + ".." + std::to_string(t0 + T) +
              " not covered by the projection " + std::to_string(e.first_year) + ".." +
              std::to_string(e.last_year()));
  std::vector<double> S(static_cast<std::size_t>(T) + 1, 1.0);
  std::vector<double> band(static_cast<std::size_t>(e.ages()));
  double cum = 0.0;
  for (int s = 1; s <= T; ++s) {
    const auto h = static_cast<std::size_t>(t0 + s - e.first_year);
    const auto rates = e.rates(path, h);
    const int a = age + s - 1;
    double hazard = 0.0;
    for (long c = 0; c < e.causes(); ++c) {
      for (long x = 0; x < e.ages(); ++x) band[static_cast<std::size_t>(x)] = rates(x, c);
      hazard += single_age_hazards(e.age_midpoints, band, a, a + 1)[0];
    }
    cum += hazard;
    S[static_cast<std::size_t>(s)] = std::exp(-cum);
  }
  return S;
}

// ---------------------------------------------------------------------------
// Export

inline constexpr int kEnsembleFormatVersion = 1;

inline io::json ensemble_sidecar(const ProjectionEnsemble& e) {
  return {{"format_version", kEnsembleFormatVersion},
          {"first_year", e.first_year},
          {"paths", e.paths},
          {"horizon", e.horizon},
          {"age_labels", e.age_labels},
          {"cause_labels", e.cause_labels},
          {"age_midpoints", io::hex_vector(e.age_midpoints)},
          {"config", to_json(e.config)},
          {"scenario", to_json(e.scenario)}};
}

inline std::string ensemble_csv(const ProjectionEnsemble& e) {
  std::string out = "path,year,age_group,cause,rate\n";
  for (std::size_t p = 0; p < e.paths; ++p)
    for (std::size_t h = 0; h < e.horizon; ++h) {
      const std::string prefix = std::to_string(p) + "," + std::to_string(e.first_year + static_cast<int>(h)) + ",";
      for (long c = 0; c < e.causes(); ++c)
        for (long x = 0; x < e.ages(); ++x) {
          out += prefix;
          out += e.age_labels[static_cast<std::size_t>(x)];
          out += ',';
          out += e.cause_labels[static_cast<std::size_t>(c)];
          out += ',';
          out += io::format_double(e.rate(p, h, x, c));
          out += '\n';
        }
    }
  return out;
}

/// Writes `<stem>.csv.gz` (long format) and `<stem>.json` (sidecar).
inline void write_ensemble(const ProjectionEnsemble& e, const std::string& stem) {
  io::write_file_atomic(stem + ".csv.gz", io::gzip_compress(ensemble_csv(e)));
  io::write_file_atomic(stem + ".json", ensemble_sidecar(e).dump(2) + "\n");
}

inline ProjectionEnsemble read_ensemble(const std::string& stem) {
  const io::json j = io::json::parse(io::read_file(stem + ".json"));
  require(io::field(j, "format_version").get<int>() == kEnsembleFormatVersion, ErrorCode::Schema,
          "unsupported ensemble format version");
  ProjectionEnsemble e;
  e.first_year = io::field(j, "first_year").get<int>();
  e.paths = io::field(j, "paths").get<std::size_t>();
  e.horizon = io::field(j, "horizon").get<std::size_t>();
  e.age_labels = io::field(j, "age_labels").get<std::vector<std::string>>();
  e.cause_labels = io::field(j, "cause_labels").get<std::vector<std::string>>();
  const Eigen::VectorXd mids = io::parse_hex_vector(io::field(j, "age_midpoints"));
  e.age_midpoints.assign(mids.data(), mids.data() + mids.size());
  const auto& cfg = io::field(j, "config");
  e.config.horizon = e.horizon;
  e.config.paths = e.paths;
  e.config.seed = io::field(cfg, "seed").get<std::uint64_t>();
  e.config.include_noise = io::field(cfg, "include_noise").get<bool>();
  e.config.allow_nonconverged = io::field(cfg, "allow_nonconverged").get<bool>();
  e.scenario = scenario_from_json(io::field(j, "scenario"));
  e.allocate();

  const std::string text = io::gzip_decompress(io::read_file(stem + ".csv.gz"));
  const std::size_t cells = static_cast<std::size_t>(e.ages() * e.causes());
  std::size_t pos = text.find('\n') + 1, row = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    require(row < e.data.size(), ErrorCode::Schema, "ensemble has more rows than declared");
    const std::size_t comma = line.rfind(',');
    require(comma != std::string_view::npos, ErrorCode::Schema, "malformed ensemble row");
    // rows are written in storage order: path, year, cause, age
    e.data[row] = io::parse_double(line.substr(comma + 1), "rate");
    ++row;
  }
  require(row == e.paths * e.horizon * cells, ErrorCode::Schema, "ensemble row count mismatch");
  return e;
}

}  // namespace lingermort
