// damp_planner: command-line front end over the C interface.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "dampplan/dampplan.h"

namespace {

void print_summary(const nlohmann::json& rep) {
  if (rep.contains("verdict_before"))
    std::printf("verdict before AD: %s\n", rep["verdict_before"].get<std::string>().c_str());
  if (rep.contains("verdict")) std::printf("verdict: %s\n", rep["verdict"].get<std::string>().c_str());
  if (rep.contains("crossovers") && !rep.contains("verify")) {
    for (const auto& e : rep["crossovers"])
      if (e["verdict"] == "critical")
        std::printf("  critical: trace %d at %.6g Hz, Re = %.6g S\n", e["trace_id"].get<int>(),
                    e["f_cr_hz"].get<double>(), e["re_lambda_s"].get<double>());
  }
  if (rep.contains("ranking")) {
    int rank = 1;
    for (const auto& r : rep["ranking"])
      std::printf("  rank %d: node %d, %s\n", rank++, r["node"].get<int>(), r["rationale"].get<std::string>().c_str());
  }
  if (rep.contains("plan"))
    std::printf("  required alpha at node %d: %.6g S over %.6g-%.6g Hz\n", rep["plan"]["node"].get<int>(),
                rep["plan"]["required_alpha_s"].get<double>(), rep["plan"]["band_lo_hz"].get<double>(),
                rep["plan"]["band_hi_hz"].get<double>());
  if (rep.contains("calibration"))
    std::printf("  calibrated K_v = %.6g (min Re[Y_ad] %.6g S, max |Im/Re| %.4g)\n",
                rep["calibration"]["k_v"].get<double>(), rep["calibration"]["min_re_y_ad_s"].get<double>(),
                rep["calibration"]["max_im_re_ratio"].get<double>());
  if (rep.contains("verify")) {
    std::printf("  AD installed at node %d\n", rep["verify"]["node"].get<int>());
    for (const auto& e : rep["verify"]["crossovers_after"])
      std::printf("  after: trace %d at %.6g Hz, Re = %.6g S (%s)\n", e["trace_id"].get<int>(),
                  e["f_cr_hz"].get<double>(), e["re_lambda_s"].get<double>(),
                  e["verdict"].get<std::string>().c_str());
  }
  if (rep.contains("ad"))
    std::printf("  Y_ad: min Re %.6g S, max |Im/Re| %.4g\n", rep["ad"]["min_re_y_ad_s"].get<double>(),
                rep["ad"]["max_im_re_ratio"].get<double>());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability analysis and damping compensation planning for multi-inverter networks"};
  app.set_version_flag("--version", std::string(dp_version()));

  dp_run_config cfg;
  dp_run_config_default(&cfg);
  std::string command, network, out_dir = ".", ad_mode;
  int node = 0, design_node = 0;
  double kv = 0.0;

  app.add_option("command", command, "sweep | criticals | rank | plan | ad-curve | verify | fixture")->required();
  app.add_option("--network", network, "network JSON file");
  app.add_option("--fmin", cfg.fmin_hz, "sweep start (Hz)")->capture_default_str();
  app.add_option("--fmax", cfg.fmax_hz, "sweep end (Hz)")->capture_default_str();
  app.add_option("--df", cfg.df_hz, "sweep spacing (Hz)")->capture_default_str();
  app.add_option("--epsilon", cfg.epsilon_s, "target damping margin (S)")->capture_default_str();
  app.add_option("--dalpha", cfg.delta_alpha_s, "conductance step (S)")->capture_default_str();
  auto* node_opt = app.add_option("--node", node, "node for plan / AD installation (default: top-ranked)");
  auto* design_opt = app.add_option("--design-node", design_node, "verify: node the AD is sized for");
  auto* mode_opt = app.add_option("--ad-mode", ad_mode, "proposed | traditional")
                       ->check(CLI::IsMember({"proposed", "traditional"}));
  auto* kv_opt = app.add_option("--kv", kv, "AD feedforward gain; skips calibration");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (command == "fixture") {
    const std::string path = (std::filesystem::path(out_dir) / "case_study.json").string();
    std::filesystem::create_directories(out_dir);
    if (dp_emit_fixture(path.c_str()) != DP_OK) {
      std::fprintf(stderr, "error: %s\n", dp_last_error());
      return 1;
    }
    std::printf("wrote %s\n", path.c_str());
    return 0;
  }

  cfg.network_path = network.empty() ? nullptr : network.c_str();
  cfg.out_dir = out_dir.c_str();
  if (node_opt->count()) {
    cfg.has_node = 1;
    cfg.node = node;
  }
  if (design_opt->count()) {
    cfg.has_design_node = 1;
    cfg.design_node = design_node;
  }
  if (mode_opt->count()) cfg.ad_mode = ad_mode == "traditional" ? DP_AD_TRADITIONAL : DP_AD_PROPOSED;
  if (kv_opt->count()) {
    cfg.has_k_v = 1;
    cfg.k_v = kv;
  }

  int exit_code = 1;
  char* report = nullptr;
  const dp_status st = dp_run_command(&cfg, command.c_str(), &exit_code, &report);
  if (st != DP_OK) {
    std::fprintf(stderr, "error (%s): %s\n", dp_status_name(st), dp_last_error());
    return 1;
  }
  print_summary(nlohmann::json::parse(report));
  dp_string_free(report);
  return exit_code;
}
