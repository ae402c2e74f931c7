#include "aqsgee/aqsgee.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "commands.hpp"
#include "config.hpp"
#include "error.hpp"
#include "estimator.hpp"

struct aqsgee_dataset {
  std::shared_ptr<const aqsgee::LongitudinalDataset> data;
};

struct aqsgee_fit {
  aqsgee::FitResult result;
  std::string link;
};

namespace {

thread_local std::string last_error;

aqsgee_status set_error(aqsgee_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Converts any exception escaping `body` into a status; nothing crosses the C boundary.
template <class F>
aqsgee_status guard(F&& body) {
  last_error.clear();
  try {
    return body();
  } catch (const aqsgee::Error& e) {
    return set_error(static_cast<aqsgee_status>(e.code()), e.what());
  } catch (const std::exception& e) {
    return set_error(AQSGEE_ERR_INTERNAL, std::string("internal error: ") + e.what());
  } catch (...) {
    return set_error(AQSGEE_ERR_INTERNAL, "internal error");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

aqsgee_status null_argument(const char* name) {
  return set_error(AQSGEE_ERR_INVALID_ARGUMENT, std::string(name) + " must not be NULL");
}

aqsgee_status copy_vector(const aqsgee::Vec& v, double* out, std::size_t len) {
  if (out == nullptr && len > 0) return null_argument("out");
  const std::size_t k = std::min<std::size_t>(len, static_cast<std::size_t>(v.size()));
  for (std::size_t j = 0; j < k; ++j) out[j] = v(static_cast<Eigen::Index>(j));
  return AQSGEE_OK;
}

}  // namespace

extern "C" {

const char* aqsgee_version(void) { return "0.1.0"; }

const char* aqsgee_last_error(void) { return last_error.c_str(); }

void aqsgee_string_free(char* s) { std::free(s); }

aqsgee_status aqsgee_dataset_load(const char* path, aqsgee_dataset** out) {
  return guard([&] {
    if (path == nullptr) return null_argument("path");
    if (out == nullptr) return null_argument("out");
    *out = nullptr;
    auto data = std::make_shared<const aqsgee::LongitudinalDataset>(aqsgee::load_dataset_csv(path));
    *out = new aqsgee_dataset{std::move(data)};
    return AQSGEE_OK;
  });
}

void aqsgee_dataset_free(aqsgee_dataset* data) { delete data; }

aqsgee_status aqsgee_dataset_dims(const aqsgee_dataset* data, size_t* n, size_t* m, size_t* p) {
  return guard([&] {
    if (data == nullptr) return null_argument("data");
    if (n) *n = data->data->n();
    if (m) *m = data->data->m();
    if (p) *p = data->data->p();
    return AQSGEE_OK;
  });
}

aqsgee_status aqsgee_fit_create(const aqsgee_dataset* data, const char* options_json, aqsgee_fit** out) {
  return guard([&] {
    if (data == nullptr) return null_argument("data");
    if (out == nullptr) return null_argument("out");
    *out = nullptr;
    aqsgee::Json doc = aqsgee::Json::object();
    if (options_json != nullptr && *options_json != '\0') {
      try {
        doc = aqsgee::Json::parse(options_json);
      } catch (const aqsgee::Json::parse_error& e) {
        throw aqsgee::ConfigError(std::string("config: options are not valid JSON (") + e.what() + ")");
      }
    }
    const aqsgee::FitConfig c = aqsgee::parse_fit_config(doc, ".", false);
    auto handle = std::make_unique<aqsgee_fit>();
    handle->result = aqsgee::fit(data->data, aqsgee::Link(c.link), c.model, c.solver, c.beta_init);
    handle->link = std::string(aqsgee::link_name(c.link));
    const bool converged = handle->result.converged;
    *out = handle.release();
    if (!converged) return set_error(AQSGEE_ERR_NOT_CONVERGED, "fit did not converge");
    return AQSGEE_OK;
  });
}

void aqsgee_fit_free(aqsgee_fit* fit) { delete fit; }

int aqsgee_fit_converged(const aqsgee_fit* fit) { return fit != nullptr && fit->result.converged ? 1 : 0; }

size_t aqsgee_fit_dim(const aqsgee_fit* fit) {
  return fit == nullptr ? 0 : static_cast<size_t>(fit->result.beta.size());
}

aqsgee_status aqsgee_fit_beta(const aqsgee_fit* fit, double* out, size_t len) {
  return guard([&] {
    if (fit == nullptr) return null_argument("fit");
    return copy_vector(fit->result.beta, out, len);
  });
}

aqsgee_status aqsgee_fit_se(const aqsgee_fit* fit, double* out, size_t len) {
  return guard([&] {
    if (fit == nullptr) return null_argument("fit");
    if (!fit->result.cov) return set_error(AQSGEE_ERR_NOT_CONVERGED, "standard errors need a converged fit");
    return copy_vector(fit->result.cov->se_sandwich, out, len);
  });
}

aqsgee_status aqsgee_fit_to_json(const aqsgee_fit* fit, char** out) {
  return guard([&] {
    if (fit == nullptr) return null_argument("fit");
    if (out == nullptr) return null_argument("out");
    const aqsgee::FitResult& r = fit->result;
    aqsgee::Json j{{"link", fit->link},
                   {"method", r.method},
                   {"converged", r.converged},
                   {"iterations", r.iterations},
                   {"g_norm", r.g_norm},
                   {"fallbacks", r.fallbacks},
                   {"ridge_events", r.ridge_events},
                   {"beta", std::vector<double>(r.beta.data(), r.beta.data() + r.beta.size())}};
    if (r.cov) {
      const auto& se = r.cov->se_sandwich;
      const auto& sm = r.cov->se_model;
      j["se_sandwich"] = std::vector<double>(se.data(), se.data() + se.size());
      j["se_model"] = std::vector<double>(sm.data(), sm.data() + sm.size());
    }
    *out = copy_string(j.dump());
    return AQSGEE_OK;
  });
}

aqsgee_status aqsgee_link_eval(const char* link, int order, double u, double* out) {
  return guard([&] {
    if (link == nullptr) return null_argument("link");
    if (out == nullptr) return null_argument("out");
    *out = aqsgee::Link(aqsgee::parse_link(link)).eval(order, u);
    return AQSGEE_OK;
  });
}

aqsgee_status aqsgee_run_command(const char* command, const char* config_path, const char* out_dir, unsigned workers,
                                 char** json_summary) {
  return guard([&] {
    if (json_summary) *json_summary = nullptr;
    if (command == nullptr) return null_argument("command");
    if (config_path == nullptr) return null_argument("config_path");
    aqsgee::CommandOptions opt;
    opt.config = config_path;
    opt.out = out_dir ? out_dir : "";
    opt.workers = workers;
    const aqsgee::CommandResult r = aqsgee::run_command(command, opt);
    if (json_summary) *json_summary = copy_string(r.summary.dump());
    if (r.exit_code != 0) return set_error(static_cast<aqsgee_status>(r.exit_code), r.message);
    return AQSGEE_OK;
  });
}

}  // extern "C"
