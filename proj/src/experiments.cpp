#include "qmda/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace qmda {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Base reporting step of the circle experiments: Delta t = q T / (50 sqrt 2)
// with q counted in these steps.
double circle_base_step(double omega) {
  return (kTwoPi / omega) / (50.0 * std::sqrt(2.0));
}

long steps_for_time(double t_end, double dt) {
  return static_cast<long>(std::ceil(t_end / dt));
}

std::string policy_name(ZeroProbPolicy p) {
  return p == ZeroProbPolicy::error ? "error" : "reset-to-stationary";
}

ZeroProbPolicy policy_from_name(const std::string& s) {
  if (s == "error") return ZeroProbPolicy::error;
  if (s == "reset-to-stationary") return ZeroProbPolicy::reset_to_stationary;
  throw ParameterError("unknown zero_prob_policy: " + s);
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot open " + path + " for writing");
  out << text;
}

}  // namespace

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.preset = name;
  const double dt_circle = circle_base_step(1.0);
  if (name == "circle-binary-a" || name == "circle-binary-b" ||
      name == "circle-binary-c") {
    cfg.backend = "analytic";
    cfg.system = "circle";
    cfg.observable = "binary";
    cfg.alpha = name == "circle-binary-c" ? std::numbers::pi / 6.0
                                          : std::numbers::pi;
    // unit rotation period: Delta t = q T/(50 sqrt2) ~ 0.014 q
    cfg.circle.omega = kTwoPi;
    cfg.dt = circle_base_step(cfg.circle.omega);
    cfg.l_basis = 64;
    cfg.s_bins = 2;
    cfg.obs_interval_steps = name == "circle-binary-a" ? 20 : 200;
    cfg.report_stride = 1;
    const double t_end = name == "circle-binary-a" ? 120.0
                         : name == "circle-binary-b" ? 300.0
                                                     : 600.0;
    cfg.n_steps = steps_for_time(t_end, cfg.dt);
  } else if (name == "circle-cos") {
    cfg.backend = "analytic";
    cfg.system = "circle";
    cfg.observable = "cos";
    cfg.circle.omega = 1.0;
    cfg.dt = dt_circle;
    cfg.l_basis = 64;
    cfg.s_bins = 32;
    cfg.obs_interval_steps = 200;
    cfg.report_stride = 1;
    cfg.n_steps = steps_for_time(720.0, dt_circle);
  } else if (name == "l63-full" || name == "l63-delay" ||
             name == "eigfuncs-dump") {
    cfg.backend = "data";
    cfg.system = "l63";
    cfg.observable = "x1";
    cfg.dt = 0.01;
    cfg.n_train = 64000;
    cfg.q_delays = name == "l63-delay" ? 24 : 0;
    cfg.l_basis = name == "l63-delay" ? 800 : 1000;
    cfg.s_bins = 32;
    cfg.obs_interval_steps = 100;
    cfg.report_stride = 1;
    cfg.n_steps = 2000;
  } else if (name == "convergence-study") {
    cfg.backend = "data";
    cfg.system = "circle";
    cfg.observable = "cos";
    cfg.circle.omega = 1.0;
    cfg.dt = dt_circle;
    cfg.l_basis = 9;
    cfg.s_bins = 4;
    cfg.obs_interval_steps = 50;
    cfg.report_stride = 10;
    cfg.n_steps = 200;
    cfg.sweep = {500, 1000, 2000, 4000};
    cfg.study_q = 10;
  } else {
    throw ParameterError("unknown preset: " + name);
  }
  return cfg;
}

std::vector<std::string> preset_names() {
  return {"circle-binary-a", "circle-binary-b", "circle-binary-c",
          "circle-cos",      "l63-full",        "l63-delay",
          "eigfuncs-dump",   "convergence-study"};
}

void apply_scale(ExperimentConfig& cfg) {
  if (cfg.scale == 1.0) return;
  if (!(cfg.scale > 0.0) || cfg.scale > 1.0)
    throw ParameterError("scale must lie in (0, 1]");
  if (cfg.backend != "data") return;  // analytic presets have no N to shrink
  cfg.n_train = std::max<long>(
      64, static_cast<long>(std::llround(static_cast<double>(cfg.n_train) * cfg.scale)));
  // Desk anchor: scale 0.25 keeps L = 300 for the fully observed L63 run.
  const double l_base = (cfg.preset == "l63-full" || cfg.preset == "eigfuncs-dump")
                            ? 1200.0
                            : static_cast<double>(cfg.l_basis);
  cfg.l_basis = std::max(
      8, static_cast<int>(std::min<double>(
             cfg.l_basis, std::llround(l_base * cfg.scale))));
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["preset"] = cfg.preset;
  j["backend"] = cfg.backend;
  j["system"] = cfg.system;
  j["observable"] = cfg.observable;
  j["alpha"] = cfg.alpha;
  j["omega"] = cfg.circle.omega;
  j["l63"] = {{"sigma", cfg.l63.sigma}, {"rho", cfg.l63.rho}, {"beta", cfg.l63.beta}};
  j["dt"] = cfg.dt;
  j["n_train"] = cfg.n_train;
  j["q_delays"] = cfg.q_delays;
  j["kernel"] = {{"k_b", cfg.kernel.k_b},
                 {"r", cfg.kernel.r},
                 {"eps_lo", cfg.kernel.eps_lo},
                 {"eps_hi", cfg.kernel.eps_hi},
                 {"eps_grid", cfg.kernel.eps_grid},
                 {"sinkhorn_tol", cfg.kernel.sinkhorn_tol},
                 {"sinkhorn_max_iter", cfg.kernel.sinkhorn_max_iter},
                 {"eigs_tol", cfg.kernel.eigs_tol}};
  j["l_basis"] = cfg.l_basis;
  j["s_bins"] = cfg.s_bins;
  j["obs_interval_steps"] = cfg.obs_interval_steps;
  j["report_stride"] = cfg.report_stride;
  j["n_steps"] = cfg.n_steps;
  j["zero_prob_policy"] = policy_name(cfg.zero_prob_policy);
  j["check_invariants"] = cfg.check_invariants;
  j["seed"] = cfg.seed;
  j["truth_seed"] = cfg.truth_seed;
  j["truth_theta0"] = cfg.truth_theta0;
  j["scale"] = cfg.scale;
  j["out_dir"] = cfg.out_dir;
  j["sweep"] = cfg.sweep;
  j["study_q"] = cfg.study_q;
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config JSON parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg.preset = j.value("preset", cfg.preset);
    cfg.backend = j.value("backend", cfg.backend);
    cfg.system = j.value("system", cfg.system);
    cfg.observable = j.value("observable", cfg.observable);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.circle.omega = j.value("omega", cfg.circle.omega);
    if (j.contains("l63")) {
      cfg.l63.sigma = j["l63"].value("sigma", cfg.l63.sigma);
      cfg.l63.rho = j["l63"].value("rho", cfg.l63.rho);
      cfg.l63.beta = j["l63"].value("beta", cfg.l63.beta);
    }
    cfg.dt = j.value("dt", cfg.dt);
    cfg.n_train = j.value("n_train", cfg.n_train);
    cfg.q_delays = j.value("q_delays", cfg.q_delays);
    if (j.contains("kernel")) {
      const auto& k = j["kernel"];
      cfg.kernel.k_b = k.value("k_b", cfg.kernel.k_b);
      cfg.kernel.r = k.value("r", cfg.kernel.r);
      cfg.kernel.eps_lo = k.value("eps_lo", cfg.kernel.eps_lo);
      cfg.kernel.eps_hi = k.value("eps_hi", cfg.kernel.eps_hi);
      cfg.kernel.eps_grid = k.value("eps_grid", cfg.kernel.eps_grid);
      cfg.kernel.sinkhorn_tol = k.value("sinkhorn_tol", cfg.kernel.sinkhorn_tol);
      cfg.kernel.sinkhorn_max_iter =
          k.value("sinkhorn_max_iter", cfg.kernel.sinkhorn_max_iter);
      cfg.kernel.eigs_tol = k.value("eigs_tol", cfg.kernel.eigs_tol);
    }
    cfg.l_basis = j.value("l_basis", cfg.l_basis);
    cfg.s_bins = j.value("s_bins", cfg.s_bins);
    cfg.obs_interval_steps = j.value("obs_interval_steps", cfg.obs_interval_steps);
    cfg.report_stride = j.value("report_stride", cfg.report_stride);
    cfg.n_steps = j.value("n_steps", cfg.n_steps);
    if (j.contains("zero_prob_policy"))
      cfg.zero_prob_policy = policy_from_name(j["zero_prob_policy"]);
    cfg.check_invariants = j.value("check_invariants", cfg.check_invariants);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.truth_seed = j.value("truth_seed", cfg.truth_seed);
    cfg.truth_theta0 = j.value("truth_theta0", cfg.truth_theta0);
    cfg.scale = j.value("scale", cfg.scale);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    if (j.contains("sweep")) cfg.sweep = j["sweep"].get<std::vector<long>>();
    cfg.study_q = j.value("study_q", cfg.study_q);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config JSON field error: ") + e.what());
  }
  return cfg;
}

std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

Eigen::Index OperatorBundle::dim() const {
  if (is_analytic())
    return std::get<AnalyticBackendOps>(ops).basis.dim();
  const auto& real = std::get<RealBackendOps>(ops);
  return real.projectors.empty() ? 0 : real.projectors.front().rows();
}

namespace {

// bundle.bin layout: magic, u64 header length, JSON header, then the raw
// double payload in the order listed in the header. The header records the
// FNV-1a hash of the payload; the loader refuses a mismatch.
constexpr char kBundleMagic[8] = {'Q', 'M', 'D', 'A', 'B', 'N', 'D', '1'};

struct PayloadSpan {
  const void* data;
  std::size_t bytes;
};

std::uint64_t hash_spans(const std::vector<PayloadSpan>& spans) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& s : spans) h = fnv1a64(s.data, s.bytes, h);
  return h;
}

json partition_to_json(const PartitionSpec& p) {
  json j;
  j["s"] = p.s;
  j["boundaries"] = std::vector<double>(p.boundaries.data(),
                                        p.boundaries.data() + p.boundaries.size());
  j["cond_means"] = std::vector<double>(p.cond_means.data(),
                                        p.cond_means.data() + p.cond_means.size());
  j["masses"] =
      std::vector<double>(p.masses.data(), p.masses.data() + p.masses.size());
  return j;
}

PartitionSpec partition_from_json(const json& j) {
  PartitionSpec p;
  p.s = j.at("s").get<int>();
  const auto b = j.at("boundaries").get<std::vector<double>>();
  const auto c = j.at("cond_means").get<std::vector<double>>();
  const auto m = j.at("masses").get<std::vector<double>>();
  p.boundaries = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  p.cond_means = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  p.masses = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  return p;
}

}  // namespace

std::uint64_t save_bundle(const OperatorBundle& bundle, const std::string& path) {
  json header;
  header["version"] = bundle.version;
  header["preset"] = bundle.preset;
  header["dt_base"] = bundle.dt_base;
  header["obs_interval_steps"] = bundle.obs_interval_steps;
  header["partition"] = partition_to_json(bundle.partition);
  header["dim"] = bundle.dim();
  if (!bundle.meta_json.empty()) header["meta"] = json::parse(bundle.meta_json);

  std::vector<PayloadSpan> spans;
  const Eigen::Index dim = bundle.dim();
  if (bundle.is_analytic()) {
    const auto& ops = std::get<AnalyticBackendOps>(bundle.ops);
    header["backend"] = "analytic";
    header["l_max"] = ops.basis.l_max;
    header["omega"] = ops.basis.omega;
    header["n_projectors"] = ops.projectors.size();
    for (const auto& e : ops.projectors)
      spans.push_back({e.data(), sizeof(std::complex<double>) *
                                     static_cast<std::size_t>(e.size())});
  } else {
    const auto& ops = std::get<RealBackendOps>(bundle.ops);
    header["backend"] = "real";
    std::vector<int> qs;
    for (const auto& [q, u] : ops.shifts) {
      qs.push_back(q);
      spans.push_back({u.data(), sizeof(double) * static_cast<std::size_t>(u.size())});
    }
    header["q_list"] = qs;
    header["n_projectors"] = ops.projectors.size();
    for (const auto& e : ops.projectors)
      spans.push_back({e.data(), sizeof(double) * static_cast<std::size_t>(e.size())});
  }
  header["has_basis"] = bundle.basis.has_value();
  if (bundle.basis) {
    header["basis_n"] = bundle.basis->n();
    header["basis_l"] = bundle.basis->l();
    spans.push_back({bundle.basis->eigenvalues.data(),
                     sizeof(double) * static_cast<std::size_t>(bundle.basis->eigenvalues.size())});
    spans.push_back({bundle.basis->values.data(),
                     sizeof(double) * static_cast<std::size_t>(bundle.basis->values.size())});
  }
  header["has_samples"] = bundle.train_samples.has_value();
  if (bundle.train_samples) {
    header["samples_n"] = bundle.train_samples->rows();
    header["samples_m"] = bundle.train_samples->cols();
    spans.push_back({bundle.train_samples->data(),
                     sizeof(double) * static_cast<std::size_t>(bundle.train_samples->size())});
    spans.push_back({bundle.train_h->data(),
                     sizeof(double) * static_cast<std::size_t>(bundle.train_h->size())});
  }

  const std::uint64_t hash = hash_spans(spans);
  header["payload_hash"] = hash_hex(hash);
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("save_bundle: cannot open " + path);
  out.write(kBundleMagic, sizeof(kBundleMagic));
  const std::uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& s : spans)
    out.write(static_cast<const char*>(s.data), static_cast<std::streamsize>(s.bytes));
  if (!out) throw ParameterError("save_bundle: write failed for " + path);
  return hash;
}

OperatorBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("load_bundle: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kBundleMagic, sizeof(magic)) != 0)
    throw BundleFormatError("load_bundle: bad magic in " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw BundleFormatError("load_bundle: truncated header");

  json header;
  try {
    header = json::parse(htext);
  } catch (const json::exception& e) {
    throw BundleFormatError(std::string("load_bundle: header parse error: ") + e.what());
  }

  OperatorBundle b;
  b.version = header.at("version").get<std::uint32_t>();
  if (b.version != 1)
    throw BundleFormatError("load_bundle: unsupported version " +
                            std::to_string(b.version));
  b.preset = header.value("preset", "");
  b.dt_base = header.at("dt_base").get<double>();
  b.obs_interval_steps = header.at("obs_interval_steps").get<int>();
  b.partition = partition_from_json(header.at("partition"));
  if (header.contains("meta")) b.meta_json = header["meta"].dump();
  const auto dim = header.at("dim").get<Eigen::Index>();

  std::uint64_t hash = 1469598103934665603ULL;
  const auto read_block = [&](char* dst, std::size_t bytes) {
    in.read(dst, static_cast<std::streamsize>(bytes));
    if (!in) throw BundleFormatError("load_bundle: truncated payload");
    hash = fnv1a64(dst, bytes, hash);
  };

  const std::string backend = header.at("backend").get<std::string>();
  const auto n_proj = header.at("n_projectors").get<std::size_t>();
  if (backend == "analytic") {
    AnalyticBackendOps ops;
    ops.basis.l_max = header.at("l_max").get<int>();
    ops.basis.omega = header.at("omega").get<double>();
    for (std::size_t i = 0; i < n_proj; ++i) {
      Eigen::MatrixXcd e(dim, dim);
      read_block(reinterpret_cast<char*>(e.data()),
                 sizeof(std::complex<double>) * static_cast<std::size_t>(e.size()));
      ops.projectors.push_back(std::move(e));
    }
    b.ops = std::move(ops);
  } else if (backend == "real") {
    RealBackendOps ops;
    for (const int q : header.at("q_list").get<std::vector<int>>()) {
      Eigen::MatrixXd u(dim, dim);
      read_block(reinterpret_cast<char*>(u.data()),
                 sizeof(double) * static_cast<std::size_t>(u.size()));
      ops.shifts.emplace(q, std::move(u));
    }
    for (std::size_t i = 0; i < n_proj; ++i) {
      Eigen::MatrixXd e(dim, dim);
      read_block(reinterpret_cast<char*>(e.data()),
                 sizeof(double) * static_cast<std::size_t>(e.size()));
      ops.projectors.push_back(std::move(e));
    }
    b.ops = std::move(ops);
  } else {
    throw BundleFormatError("load_bundle: unknown backend " + backend);
  }

  if (header.value("has_basis", false)) {
    EigenBasis basis;
    const auto bn = header.at("basis_n").get<Eigen::Index>();
    const auto bl = header.at("basis_l").get<Eigen::Index>();
    basis.eigenvalues.resize(bl);
    read_block(reinterpret_cast<char*>(basis.eigenvalues.data()),
               sizeof(double) * static_cast<std::size_t>(bl));
    basis.values.resize(bn, bl);
    read_block(reinterpret_cast<char*>(basis.values.data()),
               sizeof(double) * static_cast<std::size_t>(basis.values.size()));
    b.basis = std::move(basis);
  }
  if (header.value("has_samples", false)) {
    const auto sn = header.at("samples_n").get<Eigen::Index>();
    const auto sm = header.at("samples_m").get<Eigen::Index>();
    Eigen::MatrixXd samples(sn, sm);
    read_block(reinterpret_cast<char*>(samples.data()),
               sizeof(double) * static_cast<std::size_t>(samples.size()));
    Eigen::VectorXd h(sn);
    read_block(reinterpret_cast<char*>(h.data()),
               sizeof(double) * static_cast<std::size_t>(sn));
    b.train_samples = std::move(samples);
    b.train_h = std::move(h);
  }

  const std::string expect = header.at("payload_hash").get<std::string>();
  if (hash_hex(hash) != expect)
    throw BundleFormatError("load_bundle: payload hash mismatch in " + path +
                            " (file corrupt or mixed artifacts)");
  b.payload_hash = hash;
  return b;
}

namespace {

std::vector<int> shift_q_list(const ExperimentConfig& cfg) {
  if (cfg.obs_interval_steps % cfg.report_stride != 0)
    throw ParameterError("report_stride must divide obs_interval_steps");
  std::vector<int> qs;
  for (int q = cfg.report_stride; q <= cfg.obs_interval_steps;
       q += cfg.report_stride)
    qs.push_back(q);
  return qs;
}

Eigen::Vector3d jittered_l63_init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  return Eigen::Vector3d(1.0 + u(rng), 1.0 + u(rng), 1.0 + u(rng));
}

TrajectoryDataset training_trajectory(const ExperimentConfig& cfg,
                                      Eigen::Index n_raw) {
  if (cfg.system == "l63")
    return spinup_sample(cfg.l63, jittered_l63_init(cfg.seed), n_raw, cfg.dt);
  if (cfg.system == "circle") {
    CircleObservable obs;
    obs.kind = cfg.observable == "binary" ? CircleObservable::Kind::binary
                                          : CircleObservable::Kind::cosine;
    obs.alpha = cfg.alpha;
    std::mt19937_64 rng(cfg.seed);
    const double theta0 =
        std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
    return circle_trajectory(theta0, cfg.circle, cfg.dt, n_raw, obs);
  }
  throw ParameterError("unknown system: " + cfg.system);
}

}  // namespace

OperatorBundle train(const ExperimentConfig& cfg) {
  OperatorBundle bundle;
  bundle.preset = cfg.preset;
  bundle.dt_base = cfg.dt;
  bundle.obs_interval_steps = cfg.obs_interval_steps;

  json meta;
  meta["config"] = json::parse(config_to_json(cfg));

  if (cfg.backend == "analytic") {
    if (cfg.system != "circle")
      throw ParameterError("analytic backend exists only for the circle");
    AnalyticBackendOps ops;
    ops.basis.l_max = cfg.l_basis;
    ops.basis.omega = cfg.circle.omega;
    if (cfg.observable == "binary") {
      ops.projectors = circle_binary_projectors(cfg.alpha, ops.basis).mats;
      bundle.partition = circle_binary_partition(cfg.alpha);
    } else if (cfg.observable == "cos") {
      ops.projectors = circle_cos_projectors(cfg.s_bins, ops.basis).mats;
      bundle.partition = circle_cos_partition(cfg.s_bins);
    } else {
      throw ParameterError("analytic backend supports binary or cos observables");
    }
    bundle.ops = std::move(ops);
  } else if (cfg.backend == "data") {
    if (cfg.n_train < 2) throw ParameterError("train: n_train must be >= 2");
    const Eigen::Index n_raw =
        cfg.n_train + (cfg.q_delays > 0 ? cfg.q_delays - 1 : 0);
    const TrajectoryDataset ds = training_trajectory(cfg, n_raw);

    Eigen::MatrixXd points;
    Eigen::VectorXd h;
    if (cfg.q_delays > 0) {
      points = delay_embed(ds.h_values, cfg.q_delays).vectors;
      h = ds.h_values.tail(cfg.n_train);
    } else {
      points = ds.samples;
      h = ds.h_values;
    }

    KernelBasisResult built = build_basis(points, cfg.l_basis, cfg.kernel);
    const QuantilePartition partition = build_partition(h, cfg.s_bins);

    RealBackendOps ops;
    ops.projectors = projector_matrices(built.basis, partition).mats;
    for (const int q : shift_q_list(cfg))
      ops.shifts.emplace(q, shift_matrix(built.basis, q).m);
    bundle.ops = std::move(ops);
    bundle.partition = to_partition_spec(partition, cfg.n_train);
    bundle.train_samples = cfg.q_delays > 0
                               ? ds.samples.bottomRows(cfg.n_train).eval()
                               : ds.samples;
    bundle.train_h = h;
    bundle.basis = std::move(built.basis);

    meta["diagnostics"] = {{"epsilon_star", built.scan.epsilon_star},
                           {"slope_at_star", built.scan.slope_at_star},
                           {"epsilon_boundary_warning", built.scan.boundary_warning},
                           {"r", built.r},
                           {"sinkhorn_iterations", built.sinkhorn_iterations},
                           {"row_sum_error", built.row_sum_error},
                           {"ties_split", partition.ties_split}};
  } else {
    throw ParameterError("unknown backend: " + cfg.backend);
  }

  bundle.meta_json = meta.dump();
  return bundle;
}

namespace {

Eigen::VectorXd circle_truth_series(const ExperimentConfig& cfg) {
  const Eigen::Index count = cfg.n_steps + 1;
  Eigen::VectorXd h(count);
  for (Eigen::Index n = 0; n < count; ++n) {
    const double theta = std::fmod(
        cfg.truth_theta0 + static_cast<double>(n) * cfg.circle.omega * cfg.dt,
        kTwoPi);
    const double t = theta < 0 ? theta + kTwoPi : theta;
    h[n] = cfg.observable == "binary" ? (t < cfg.alpha ? 1.0 : 0.0)
                                      : std::cos(t);
  }
  return h;
}

Eigen::VectorXd l63_truth_series(const ExperimentConfig& cfg) {
  const Eigen::Index n = cfg.n_steps + 1;
  const TrajectoryDataset truth =
      spinup_sample(cfg.l63, jittered_l63_init(cfg.truth_seed), n, cfg.dt);
  return truth.h_values;
}

}  // namespace

AssimilationResult assimilate(const OperatorBundle& bundle,
                              const ExperimentConfig& cfg) {
  AssimilationResult result;
  result.truth_h = cfg.system == "circle" ? circle_truth_series(cfg)
                                          : l63_truth_series(cfg);

  FilterConfig fc;
  fc.obs_interval_steps = cfg.obs_interval_steps;
  fc.report_stride = cfg.report_stride;
  fc.zero_prob_policy = cfg.zero_prob_policy;
  fc.check_invariants = cfg.check_invariants;

  if (bundle.is_analytic()) {
    const auto& ops = std::get<AnalyticBackendOps>(bundle.ops);
    const CirclePropagator prop(ops.basis, bundle.dt_base);
    result.records = run_filter<std::complex<double>>(
        prop, ops.projectors, bundle.partition, result.truth_h,
        bundle.dt_base, fc);
  } else {
    const auto& ops = std::get<RealBackendOps>(bundle.ops);
    for (const int q : shift_q_list(cfg))
      if (!ops.shifts.count(q))
        throw ParameterError(
            "assimilate: bundle lacks U^(q) for q=" + std::to_string(q) +
            "; retrain with a matching report stride");
    const ShiftPropagator prop(ops.shifts);
    result.records = run_filter<double>(prop, ops.projectors, bundle.partition,
                                        result.truth_h, bundle.dt_base, fc);
  }
  result.summary =
      summarize(to_metrics_series(result.records, bundle.partition.s), -1.0);
  return result;
}

EigenBasis align_circle_basis(const EigenBasis& basis,
                              const Eigen::VectorXd& thetas) {
  if (basis.l() % 2 != 1)
    throw ParameterError("align_circle_basis: L must be odd (constant + pairs)");
  const Eigen::Index n = basis.n();
  if (thetas.size() != n)
    throw ParameterError("align_circle_basis: theta count mismatch");

  EigenBasis aligned = basis;
  const double sqrt2 = std::sqrt(2.0);
  const int pairs = static_cast<int>((basis.l() - 1) / 2);
  for (int m = 1; m <= pairs; ++m) {
    Eigen::MatrixXd target(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      target(i, 0) = sqrt2 * std::cos(m * thetas[i]);
      target(i, 1) = sqrt2 * std::sin(m * thetas[i]);
    }
    const Eigen::MatrixXd pair = basis.values.middleCols(2 * m - 1, 2);
    const Eigen::Matrix2d cross = pair.transpose() * target / static_cast<double>(n);
    const Eigen::JacobiSVD<Eigen::Matrix2d> svd(
        cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix2d w = svd.matrixU() * svd.matrixV().transpose();
    aligned.values.middleCols(2 * m - 1, 2) = pair * w;
  }
  return aligned;
}

ConvergenceReport convergence_study(const ExperimentConfig& cfg) {
  if (cfg.system != "circle" || cfg.observable != "cos")
    throw ParameterError("convergence_study: circle data with the cos observable");
  if (cfg.l_basis % 2 != 1)
    throw ParameterError("convergence_study: L must be odd");
  const int l_max = (cfg.l_basis - 1) / 2;
  const int s = cfg.s_bins;

  AnalyticCircleBasis abasis{l_max, cfg.circle.omega};
  const ComplexProjectorSet analytic_projs = circle_cos_projectors(s, abasis);
  std::vector<Eigen::MatrixXd> e_ref;
  for (const auto& e : analytic_projs.mats)
    e_ref.push_back(real_projector(e, l_max));
  const Eigen::MatrixXd u_ref =
      real_shift_matrix(abasis, cfg.study_q * cfg.dt);

  // analytic reference probabilities on the shared truth
  ExperimentConfig acfg = cfg;
  acfg.backend = "analytic";
  acfg.l_basis = l_max;
  const OperatorBundle ref_bundle = train(acfg);
  const AssimilationResult ref_run = assimilate(ref_bundle, acfg);

  ConvergenceReport report;
  for (const long n : cfg.sweep) {
    ExperimentConfig dcfg = cfg;
    dcfg.backend = "data";
    dcfg.n_train = n;
    const OperatorBundle bundle = train(dcfg);

    const Eigen::VectorXd thetas =
        bundle.train_samples->col(1).binaryExpr(
            bundle.train_samples->col(0),
            [](double y, double x) { return std::atan2(y, x); });
    const EigenBasis aligned = align_circle_basis(*bundle.basis, thetas);

    const Eigen::MatrixXd u_dd = shift_matrix(aligned, cfg.study_q).m;
    report.u_errors.push_back((u_dd - u_ref).cwiseAbs().maxCoeff());

    const QuantilePartition part = build_partition(*bundle.train_h, s);
    double berr = 0.0;
    for (int k = 1; k < s; ++k) {
      const double exact = std::cos((1.0 - static_cast<double>(k) / s) *
                                    std::numbers::pi);
      berr = std::max(berr, std::abs(part.boundaries[k - 1] - exact));
    }
    report.boundary_errors.push_back(berr);

    const ProjectorSet e_dd = projector_matrices(aligned, part);
    double eerr = 0.0;
    for (int i = 0; i < s; ++i)
      eerr = std::max(
          eerr, (e_dd.mats[static_cast<std::size_t>(i)] -
                 e_ref[static_cast<std::size_t>(i)]).cwiseAbs().maxCoeff());
    report.e_errors.push_back(eerr);

    const AssimilationResult run = assimilate(bundle, dcfg);
    if (run.records.size() != ref_run.records.size())
      throw InternalConsistencyError("convergence_study: report grids differ");
    double perr = 0.0;
    for (std::size_t k = 0; k < run.records.size(); ++k)
      perr = std::max(perr, (run.records[k].probs - ref_run.records[k].probs)
                                .cwiseAbs()
                                .maxCoeff());
    report.prob_errors.push_back(perr);
    report.n_values.push_back(n);
  }
  return report;
}

void write_convergence_csv(const ConvergenceReport& report,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParameterError("write_convergence_csv: cannot open " + path);
  out << "N,err_U,err_E,err_boundary,err_prob\n";
  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < report.n_values.size(); ++i) {
    out << report.n_values[i] << ',';
    put(report.u_errors[i]);
    out << ',';
    put(report.e_errors[i]);
    out << ',';
    put(report.boundary_errors[i]);
    out << ',';
    put(report.prob_errors[i]);
    out << '\n';
  }
}

int count_zero_crossings(const Eigen::VectorXd& series) {
  int crossings = 0;
  double prev = 0.0;
  bool have_prev = false;
  for (Eigen::Index i = 0; i < series.size(); ++i) {
    const double v = series[i];
    if (v == 0.0) continue;
    if (have_prev && prev * v < 0.0) ++crossings;
    prev = v;
    have_prev = true;
  }
  return crossings;
}

void eigfuncs_dump(const OperatorBundle& bundle, int j_count,
                   double window_time, const std::string& out_dir) {
  if (!bundle.basis || !bundle.train_samples || !bundle.train_h)
    throw ParameterError("eigfuncs_dump: bundle carries no training artifacts");
  const EigenBasis& basis = *bundle.basis;
  const Eigen::MatrixXd& samples = *bundle.train_samples;
  const int j_end = std::min<int>(j_count, static_cast<int>(basis.l()));

  fs::create_directories(out_dir);
  char buf[32];
  const auto put = [&buf](std::ofstream& out, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };

  const auto write_rows = [&](const std::string& path, Eigen::Index row_end) {
    std::ofstream out(path);
    if (!out) throw ParameterError("eigfuncs_dump: cannot open " + path);
    out << "# eigenvalues:";
    for (int j = 0; j < j_end; ++j) {
      out << (j == 0 ? " " : ",");
      put(out, basis.eigenvalues[j]);
    }
    out << '\n' << "n,t";
    for (Eigen::Index c = 0; c < samples.cols(); ++c) out << ",x" << (c + 1);
    for (int j = 0; j < j_end; ++j) out << ",phi_" << j;
    out << '\n';
    for (Eigen::Index i = 0; i < row_end; ++i) {
      out << i << ',';
      put(out, static_cast<double>(i) * bundle.dt_base);
      for (Eigen::Index c = 0; c < samples.cols(); ++c) {
        out << ',';
        put(out, samples(i, c));
      }
      for (int j = 0; j < j_end; ++j) {
        out << ',';
        put(out, basis.values(i, j));
      }
      out << '\n';
    }
  };

  write_rows((fs::path(out_dir) / "eigfuncs.csv").string(), basis.n());
  const Eigen::Index window =
      std::min<Eigen::Index>(basis.n(),
                             static_cast<Eigen::Index>(std::llround(
                                 window_time / bundle.dt_base)) + 1);
  write_rows((fs::path(out_dir) / "eigfuncs_series.csv").string(), window);
}

PresetOutputs run_pipeline(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  if (cfg.out_dir.empty())
    throw ParameterError("run_pipeline: out_dir must be set");
  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);

  PresetOutputs out;
  out.config = cfg;

  if (cfg.preset == "convergence-study") {
    const ConvergenceReport report = convergence_study(cfg);
    out.convergence_csv_path = (dir / "convergence.csv").string();
    write_convergence_csv(report, out.convergence_csv_path);
    write_text_file((dir / "config.json").string(), config_to_json(cfg));
    return out;
  }

  const OperatorBundle bundle = train(cfg);
  out.bundle_path = (dir / "bundle.bin").string();
  out.bundle_hash = save_bundle(bundle, out.bundle_path);

  json cfg_json = json::parse(config_to_json(cfg));
  cfg_json["bundle_hash"] = hash_hex(out.bundle_hash);
  write_text_file((dir / "config.json").string(), cfg_json.dump(2));

  if (cfg.preset == "eigfuncs-dump") {
    eigfuncs_dump(bundle, 30, 10.0, cfg.out_dir);
    return out;
  }

  const AssimilationResult result = assimilate(bundle, cfg);
  out.run_csv_path = (dir / "run.csv").string();
  write_run_csv(result.records, bundle.partition.s, out.run_csv_path);
  out.summary = result.summary;

  long n_measurements = 0, n_resets = 0;
  for (const auto& r : result.records) {
    if (r.measured_bin >= 0) ++n_measurements;
    if (r.reset_event) ++n_resets;
  }
  json summary;
  summary["preset"] = cfg.preset;
  summary["bundle_hash"] = hash_hex(out.bundle_hash);
  summary["s_bins"] = bundle.partition.s;
  summary["log2_s"] = std::log2(static_cast<double>(bundle.partition.s));
  summary["n_records"] = result.records.size();
  summary["n_measurements"] = n_measurements;
  summary["n_resets"] = n_resets;
  summary["mean_precision"] = out.summary.mean_precision;
  summary["mean_ignorance"] = out.summary.mean_ignorance;
  summary["useful_fraction"] = out.summary.useful_fraction;
  summary["n_non_useful"] = out.summary.n_non_useful;
  summary["n_excursions"] = out.summary.n_excursions;
  summary["n_clamped"] = out.summary.n_clamped;
  out.summary_path = (dir / "summary.json").string();
  write_text_file(out.summary_path, summary.dump(2));
  return out;
}

PresetOutputs run_preset(const std::string& name, const std::string& out_dir,
                         double scale) {
  ExperimentConfig cfg = preset_config(name);
  cfg.scale = scale;
  apply_scale(cfg);
  cfg.out_dir = out_dir;
  return run_pipeline(cfg);
}

}  // namespace qmda
