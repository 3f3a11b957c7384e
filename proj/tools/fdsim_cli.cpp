// Command line driver: Monte Carlo sweeps over the splitting ratio or the
// node power budget, single-draw reports, and a self-check battery.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fdsim/experiments.hpp"

namespace {

using namespace fdsim;

PhaseSelect parse_phase(const std::string& s) {
  if (s == "forward") return PhaseSelect::Forward;
  if (s == "backward") return PhaseSelect::Backward;
  if (s == "both") return PhaseSelect::Both;
  throw ConfigError("unknown phase: " + s);
}

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> realizations;
  std::string out_path;
  std::string format = "csv";
  int threads = 0;
  std::string phase = "both";
};

void add_common(CLI::App* cmd, CommonArgs* args, bool with_output) {
  cmd->add_option("--config", args->config_path, "scenario config JSON")
      ->required();
  cmd->add_option("--seed", args->seed, "override the config seed");
  cmd->add_option("--realizations", args->realizations,
                  "override the number of channel draws");
  cmd->add_option("--threads", args->threads,
                  "worker threads (default: FD_SIM_THREADS or 1)");
  cmd->add_option("--phase", args->phase,
                  "forward | backward | both (default both)");
  if (with_output) {
    cmd->add_option("--out", args->out_path, "output file (default stdout)");
    cmd->add_option("--format", args->format, "csv | json (default csv)");
  }
}

ScenarioConfig make_config(const CommonArgs& args) {
  ScenarioConfig cfg = load_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.realizations) cfg.n_realizations = *args.realizations;
  cfg.validate();
  return cfg;
}

void write_result(const SweepResult& res, const CommonArgs& args) {
  if (args.out_path.empty()) {
    if (args.format == "csv")
      emit_csv(res, std::cout);
    else if (args.format == "json")
      emit_json(res, std::cout);
    else
      throw ConfigError("unknown output format: " + args.format);
    return;
  }
  emit_to_file(res, args.out_path, args.format);
}

int run_single(const CommonArgs& args, double rho) {
  ScenarioConfig cfg = make_config(args);
  const RealizationOutput out = run_realization(cfg, rho, cfg.seed);
  nlohmann::json j;
  auto phase_json = [](const PhaseReport& ph) {
    nlohmann::json p;
    p["rho"] = ph.rho;
    p["regime"] = to_string(ph.regime);
    for (int i = 0; i < 2; ++i) {
      const std::string tag = "node_" + std::to_string(i + 1);
      p[tag] = {{"rate_ofdma", ph.ofdma[i].rate},
                {"rate_ofdma_baseline", ph.ofdma[i].baseline},
                {"eta_r_ofdma", ph.ofdma[i].eta_r},
                {"rate_signaling", ph.signaling[i].rate},
                {"rate_signaling_baseline", ph.signaling[i].baseline},
                {"eta_r_signaling", ph.signaling[i].eta_r},
                {"energy_exact", ph.energy[i].exact},
                {"energy_approx", ph.energy[i].approx},
                {"eta_e", ph.eta_e[i]}};
    }
    p["resamples"] = ph.resamples;
    return p;
  };
  const PhaseSelect sel = parse_phase(args.phase);
  j["schema"] = "fdsim.single/1";
  j["seed"] = cfg.seed;
  if (sel != PhaseSelect::Backward) j["forward"] = phase_json(out.forward);
  if (sel != PhaseSelect::Forward) j["backward"] = phase_json(out.backward);
  std::cout << j.dump(2) << "\n";
  return 0;
}

// Self-check battery over the configured scenario. Each check prints one
// line; returns the number of failures.
int run_validation(const ScenarioConfig& cfg, std::ostream& out) {
  int failures = 0;
  auto report = [&](const std::string& name, bool ok,
                    const std::string& detail) {
    out << (ok ? "ok   " : "FAIL ") << name;
    if (!detail.empty()) out << " (" << detail << ")";
    out << "\n";
    if (!ok) ++failures;
  };
  const DerivedParams prm = DerivedParams::from(cfg);
  auto ops = std::make_shared<const OfdmOps>(OfdmOps::build(prm.grid));
  const int n = prm.grid.n_subcarriers;
  const int l = prm.grid.cp_len;
  const int nl = prm.grid.block_len();

  {
    const double err =
        (ops->F * ops->F.adjoint() - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
    report("dft_unitary", err <= 1e-12, "max dev " + std::to_string(err));
  }
  {
    const double err =
        (ops->B * ops->A - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
    report("cp_transparent", err == 0.0, "");
  }
  {
    double err = (ops->D1 + ops->D2 - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
    err = std::max(err, (ops->Dt1 * ops->Dt1.adjoint() -
                         Mat::Identity(ops->set_size(1), ops->set_size(1)))
                            .cwiseAbs()
                            .maxCoeff());
    err = std::max(err,
                   (ops->Dt1.adjoint() * ops->Dt1 - ops->D1).cwiseAbs().maxCoeff());
    report("selectors_consistent", err == 0.0, "");
  }
  {
    Rng rng(mix_seed(cfg.seed, 0xdead));
    const PowerDelayProfile pdp = exp_pdp(l, prm.pdp_decay_ratio);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const ChannelTaps taps = sample_taps(pdp, rng);
      const ConvolutionPair cp = convolution_matrices(taps, nl);
      worst = std::max(
          worst, (cp.full - cp.lower - cp.upper).cwiseAbs().maxCoeff());
      const Vec ht = freq_response(taps, prm.grid);
      const Mat eff = ops->F * ops->B * cp.lower * ops->A * ops->Finv;
      const Mat diag = ht.asDiagonal();
      worst = std::max(worst, (eff - diag).cwiseAbs().maxCoeff());
    }
    report("ofdm_diagonalization", worst <= 1e-10,
           "max dev " + std::to_string(worst));
  }
  {
    Rng rng(mix_seed(cfg.seed, 0xbeef));
    const PowerDelayProfile pdp = exp_pdp(l, prm.pdp_decay_ratio);
    double worst = 0.0;
    bool dims_ok = true;
    for (int trial = 0; trial < 5; ++trial) {
      const ConvolutionPair h11 = convolution_matrices(sample_taps(pdp, rng), nl);
      const ConvolutionPair h12 = convolution_matrices(sample_taps(pdp, rng), nl);
      const ConvolutionPair hs = convolution_matrices(sample_taps(pdp, rng), nl);
      try {
        const Precoder g1 = forward_nullspace(h11, h12, *ops, 1);
        dims_ok = dims_ok && g1.gamma.cols() == l;
        worst = std::max(worst, (ops->D1 * ops->F * ops->B * h11.lower *
                                 g1.gamma).cwiseAbs().maxCoeff());
        worst = std::max(worst, (ops->D2 * ops->F * ops->B * h12.lower *
                                 g1.gamma).cwiseAbs().maxCoeff());
        const Precoder b1 = backward_nullspace(hs, *ops, 1);
        dims_ok = dims_ok && b1.gamma.cols() == nl - ops->set_size(2);
        worst = std::max(worst, (ops->Dt2 * ops->F * ops->B * hs.lower *
                                 b1.gamma).cwiseAbs().maxCoeff());
      } catch (const NullspaceDimensionMismatch&) {
        dims_ok = false;
      }
    }
    report("precoder_nullspaces", dims_ok && worst <= 1e-9,
           "max residual " + std::to_string(worst));
  }
  {
    Rng rng(mix_seed(cfg.seed, 0xcafe));
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      Mat g(nl, nl);
      for (int c = 0; c < nl; ++c)
        for (int rix = 0; rix < nl; ++rix) g(rix, c) = rng.cgauss(1.0);
      const Mat cov = g * g.adjoint() + Mat::Identity(nl, nl);
      const Mat w = inv_sqrt(cov);
      const double err =
          (w * cov * w.adjoint() - Mat::Identity(nl, nl)).cwiseAbs().maxCoeff();
      worst = std::max(worst, err);
    }
    report("whitening_identity", worst <= 1e-8,
           "max dev " + std::to_string(worst));
  }
  {
    Rng rng(mix_seed(cfg.seed, 0xfeed));
    double worst_budget = 0.0;
    bool kkt_ok = true;
    for (int trial = 0; trial < 20; ++trial) {
      RealVec gains(16);
      for (int k = 0; k < 16; ++k) gains(k) = -std::log(rng.uniform_oc());
      const double budget = 1.0 + 9.0 * rng.uniform_oc();
      const PowerAllocation alloc = waterfill(gains, budget);
      worst_budget = std::max(
          worst_budget, std::abs(alloc.per_channel.sum() - budget) / budget);
      for (int k = 0; k < 16; ++k) {
        const double slack = alloc.water_level - 1.0 / gains(k);
        if (alloc.per_channel(k) > 0.0 &&
            std::abs(alloc.per_channel(k) - slack) > 1e-9 * budget)
          kkt_ok = false;
        if (alloc.per_channel(k) == 0.0 && slack > 0.0) kkt_ok = false;
      }
    }
    report("waterfilling_kkt", kkt_ok && worst_budget <= 1e-12,
           "budget dev " + std::to_string(worst_budget));
  }
  {
    bool ok = true;
    std::string detail;
    for (int trial = 0; trial < 3 && ok; ++trial) {
      const RealizationOutput out1 =
          run_realization(cfg, 1.0, mix_seed(cfg.seed, 100 + trial));
      for (int i = 0; i < 2; ++i) {
        if (out1.forward.signaling[i].eta_r != 1.0 ||
            out1.forward.ofdma[i].eta_r != 1.0 ||
            out1.backward.signaling[i].eta_r != 1.0 ||
            out1.backward.ofdma[i].eta_r != 1.0) {
          ok = false;
          detail = "eta_r at unit ratio differs from 1";
        }
        if (out1.forward.eta_e[i] != 0.0 || out1.backward.eta_e[i] != 0.0) {
          ok = false;
          detail = "eta_e at unit ratio differs from 0";
        }
      }
    }
    report("unit_ratio_baseline", ok, detail);
  }
  {
    const RealizationOutput a =
        run_realization(cfg, 0.5, mix_seed(cfg.seed, 777));
    const RealizationOutput b =
        run_realization(cfg, 0.5, mix_seed(cfg.seed, 777));
    const bool ok =
        a.forward.signaling[0].rate == b.forward.signaling[0].rate &&
        a.backward.signaling[1].rate == b.backward.signaling[1].rate &&
        a.forward.energy[0].exact == b.forward.energy[0].exact &&
        a.backward.energy[1].exact == b.backward.energy[1].exact;
    report("deterministic_replay", ok, "");
  }
  return failures;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"four-node full-duplex link simulator with RF energy recycling"};
  app.require_subcommand(1);

  CommonArgs rho_args, pow_args, single_args, val_args;
  double single_rho = 0.5;

  CLI::App* sweep_rho_cmd =
      app.add_subcommand("sweep-rho", "sweep the power splitting ratio");
  add_common(sweep_rho_cmd, &rho_args, true);

  CLI::App* sweep_pow_cmd =
      app.add_subcommand("sweep-power", "sweep the node power budget");
  add_common(sweep_pow_cmd, &pow_args, true);

  CLI::App* single_cmd =
      app.add_subcommand("single", "evaluate one channel draw at one ratio");
  add_common(single_cmd, &single_args, false);
  single_cmd->add_option("--rho", single_rho, "splitting ratio in [0, 1]")
      ->check(CLI::Range(0.0, 1.0));

  CLI::App* validate_cmd =
      app.add_subcommand("validate", "run the internal consistency battery");
  validate_cmd->add_option("--config", val_args.config_path,
                           "scenario config JSON")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (sweep_rho_cmd->parsed()) {
    ScenarioConfig cfg = make_config(rho_args);
    const SweepResult res = sweep_rho(cfg, parse_phase(rho_args.phase),
                                      resolve_threads(rho_args.threads));
    write_result(res, rho_args);
    return 0;
  }
  if (sweep_pow_cmd->parsed()) {
    ScenarioConfig cfg = make_config(pow_args);
    const SweepResult res = sweep_power(cfg, parse_phase(pow_args.phase),
                                        resolve_threads(pow_args.threads));
    write_result(res, pow_args);
    return 0;
  }
  if (single_cmd->parsed()) return run_single(single_args, single_rho);
  if (validate_cmd->parsed()) {
    const ScenarioConfig cfg = load_config(val_args.config_path);
    const int failures = run_validation(cfg, std::cout);
    if (failures > 0) {
      std::cout << failures << " check(s) failed\n";
      return 2;
    }
    std::cout << "all checks passed\n";
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const fdsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const fdsim::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const fdsim::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
