// Command-line front end; talks to the library only through the C interface.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "yamabe/yamabe_c.h"

int main(int argc, char** argv) {
  CLI::App app{"Singular Yamabe problem on generalized solid cones"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  int threads = 1;
  bool strict = false;
  const char* kinds[][2] = {{"curvature", "closed-form curvature table"},
                            {"solve", "single nonlinear solve or blow-up exhaustion"},
                            {"verify-model", "convergence study against the exact profile"},
                            {"dichotomy", "maximal solutions over shrinking truncations"},
                            {"eigen", "principal eigenvalue of the linear operator"}};
  for (const auto& k : kinds) {
    CLI::App* sub = app.add_subcommand(k[0], k[1]);
    sub->add_option("--config", config_path, "configuration file")->required();
    sub->add_option("--out", out_dir, "output directory (default: [experiment] output, else ./out)");
    sub->add_option("--threads", threads, "concurrent dichotomy cases")->check(CLI::Range(1, 256));
    sub->add_flag("--strict", strict, "turn M-matrix warnings into errors");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  const std::string kind = app.get_subcommands().front()->get_name();

  yamabe_config* cfg = nullptr;
  if (yamabe_config_load(config_path.c_str(), &cfg) != YAMABE_OK ||
      yamabe_config_select_kind(cfg, kind.c_str()) != YAMABE_OK) {
    std::fprintf(stderr, "config error: %s\n", yamabe_last_error());
    yamabe_config_free(cfg);
    return 1;
  }
  yamabe_result* res = nullptr;
  const yamabe_status st =
      yamabe_run(cfg, out_dir.empty() ? nullptr : out_dir.c_str(), threads, strict ? 1 : 0, 1, &res);
  yamabe_config_free(cfg);
  if (!res) {
    std::fprintf(stderr, "error: %s\n", yamabe_last_error());
    return st == YAMABE_ERR_CONFIG ? 1 : 2;
  }
  for (std::size_t i = 0; i < yamabe_result_verdict_count(res); ++i)
    std::printf("verdict %s\n", yamabe_result_verdict(res, i));
  for (std::size_t i = 0; i < yamabe_result_file_count(res); ++i)
    std::printf("wrote %s\n", yamabe_result_file(res, i));
  const int code = yamabe_result_exit_code(res);
  if (code != 0) std::fprintf(stderr, "%s\n", yamabe_result_message(res));
  yamabe_result_free(res);
  return code;
}
