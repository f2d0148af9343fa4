#include "yamabe/yamabe_c.h"

#include <exception>
#include <string>

#include "yamabe/error.hpp"
#include "yamabe/experiment.hpp"

struct yamabe_config {
  yamabe::ExperimentConfig config;
  std::string kind;
};

struct yamabe_result {
  yamabe::RunResult result;
  std::string summary;
};

namespace {

thread_local std::string g_last_error;

yamabe_status record(yamabe_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <class Fn>
yamabe_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const yamabe::Error& e) {
    return record(e.code() == yamabe::ErrorCode::kConfig ? YAMABE_ERR_CONFIG
                  : e.code() == yamabe::ErrorCode::kDomain || e.code() == yamabe::ErrorCode::kInvalidArgument
                      ? YAMABE_ERR_ARGUMENT
                      : YAMABE_ERR_SOLVER,
                  e.what());
  } catch (const std::exception& e) {
    return record(YAMABE_ERR_INTERNAL, e.what());
  } catch (...) {
    return record(YAMABE_ERR_INTERNAL, "unknown exception");
  }
}

yamabe_status store_config(yamabe::ExperimentConfig cfg, yamabe_config** out) {
  auto* h = new yamabe_config{std::move(cfg), {}};
  h->kind = yamabe::to_string(h->config.kind);
  *out = h;
  return YAMABE_OK;
}

}  // namespace

extern "C" {

const char* yamabe_version(void) { return "1.0.0"; }

const char* yamabe_last_error(void) { return g_last_error.c_str(); }

yamabe_status yamabe_config_load(const char* path, yamabe_config** out) {
  if (!path || !out) return record(YAMABE_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { return store_config(yamabe::load_config(path), out); });
}

yamabe_status yamabe_config_parse(const char* text, yamabe_config** out) {
  if (!text || !out) return record(YAMABE_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { return store_config(yamabe::parse_config_text(text), out); });
}

yamabe_status yamabe_config_kind(const yamabe_config* cfg, const char** kind) {
  if (!cfg || !kind) return record(YAMABE_ERR_ARGUMENT, "null argument");
  *kind = cfg->kind.c_str();
  return YAMABE_OK;
}

yamabe_status yamabe_config_select_kind(yamabe_config* cfg, const char* kind) {
  if (!cfg || !kind) return record(YAMABE_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    const auto k = yamabe::parse_experiment_kind(kind);
    if (cfg->config.kind_set && cfg->config.kind != k)
      yamabe::fail(yamabe::ErrorCode::kConfig, std::string("config declares kind '") + cfg->kind +
                                                   "' but '" + kind + "' was requested");
    cfg->config.kind = k;
    cfg->config.kind_set = true;
    cfg->config.validate();
    cfg->kind = kind;
    return YAMABE_OK;
  });
}

void yamabe_config_free(yamabe_config* cfg) { delete cfg; }

yamabe_status yamabe_run(const yamabe_config* cfg, const char* out_dir, int threads, int strict, int write_files,
                         yamabe_result** out) {
  if (!cfg || !out) return record(YAMABE_ERR_ARGUMENT, "null argument");
  if (threads < 1) return record(YAMABE_ERR_ARGUMENT, "threads must be >= 1");
  *out = nullptr;
  return guarded([&] {
    yamabe::RunOptions opt;
    if (out_dir) opt.out_dir = out_dir;
    opt.threads = threads;
    opt.strict = strict != 0;
    opt.write_files = write_files != 0;
    auto* h = new yamabe_result{yamabe::run_experiment(cfg->config, opt), {}};
    h->summary = h->result.summary.dump(2);
    *out = h;
    const int code = h->result.exit_code;
    if (code == 0) return YAMABE_OK;
    return record(static_cast<yamabe_status>(code), h->result.message);
  });
}

int yamabe_result_exit_code(const yamabe_result* res) { return res ? res->result.exit_code : -1; }

const char* yamabe_result_message(const yamabe_result* res) { return res ? res->result.message.c_str() : nullptr; }

const char* yamabe_result_summary_json(const yamabe_result* res) { return res ? res->summary.c_str() : nullptr; }

size_t yamabe_result_verdict_count(const yamabe_result* res) { return res ? res->result.verdicts.size() : 0; }

const char* yamabe_result_verdict(const yamabe_result* res, size_t index) {
  if (!res || index >= res->result.verdicts.size()) return nullptr;
  return res->result.verdicts[index].c_str();
}

size_t yamabe_result_file_count(const yamabe_result* res) { return res ? res->result.files.size() : 0; }

const char* yamabe_result_file(const yamabe_result* res, size_t index) {
  if (!res || index >= res->result.files.size()) return nullptr;
  return res->result.files[index].c_str();
}

void yamabe_result_free(yamabe_result* res) { delete res; }

yamabe_status yamabe_curvatures_eval(int n, int d, double h, double t, yamabe_curvatures* out) {
  if (!out) return record(YAMABE_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    const auto cone = yamabe::ConeModel::make(n, d, h);
    const auto va = yamabe::vertex_asymptotics(cone);
    const auto conf = yamabe::conformal_rho2_curvatures(n, 0.0, va.rho_lap_rho, va.rho_H, va.grad_rho_nu);
    const auto ms = yamabe::exact_model_solution(cone);
    out->product_R = yamabe::product_scalar_curvature(n, d);
    out->model_H = yamabe::model_boundary_mean_curvature(d, h);
    out->euclidean_H = yamabe::euclidean_boundary_mean_curvature(n, d, h, t);
    out->conformal_R = conf.scalar;
    out->conformal_H = conf.mean;
    out->c0_star = ms.c0_star;
    out->c1_star = ms.c1_star;
    return YAMABE_OK;
  });
}

}  // extern "C"
