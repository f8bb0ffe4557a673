#include "fewshot/fewshot.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "fewshot/classifier.hpp"
#include "fewshot/experiments.hpp"
#include "fewshot/features.hpp"
#include "fewshot/geometry.hpp"
#include "fewshot/parallel.hpp"

using namespace fewshot;

struct fsl_kernel {
  KernelSpec spec;
};

struct fsl_combination {
  FeatureCombination combo;
};

struct fsl_model {
  FewShotModel model;
};

struct fsl_table {
  FeatureTable table;
};

namespace {

thread_local std::string last_error;

struct BadArgument {
  const char* what;
};

fsl_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return FSL_INVALID_ARGUMENT;
    case ErrorCode::Config: return FSL_CONFIG;
    case ErrorCode::InputData: return FSL_INPUT_DATA;
    case ErrorCode::Numeric: return FSL_NUMERIC;
    case ErrorCode::Io: return FSL_IO;
  }
  return FSL_INTERNAL;
}

template <class F>
fsl_status guard(F&& body) {
  last_error.clear();
  try {
    body();
    return FSL_OK;
  } catch (const BadArgument& e) {
    last_error = e.what;
    return FSL_INVALID_ARGUMENT;
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    last_error = std::string("invalid JSON: ") + e.what();
    return FSL_CONFIG;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return FSL_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return FSL_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return FSL_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw BadArgument{what};
}

Matrix rows_of(const double* data, size_t n, size_t dim) {
  require(data != nullptr || n * dim == 0, "null point array");
  require(dim > 0, "dimension must be > 0");
  return Eigen::Map<const Matrix>(data, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
}

DataVector vec_of(const double* data, size_t dim) {
  require(data != nullptr, "null vector");
  return {data, dim};
}

void check_dim(const FeatureCombination& c, size_t dim) {
  require(static_cast<Eigen::Index>(dim) == c.dim(), "dimension does not match the combination");
}

void copy_out(const Vector& v, double* out) {
  require(out != nullptr, "null output array");
  std::memcpy(out, v.data(), sizeof(double) * static_cast<size_t>(v.size()));
}

fsl_ratio_estimate to_c(const VolumeRatioEstimate& e) { return {e.hits, e.trials, e.ratio, e.ci_low, e.ci_high}; }

}  // namespace

extern "C" {

const char* fsl_version(void) { return library_version(); }

const char* fsl_status_name(fsl_status status) {
  switch (status) {
    case FSL_OK: return "ok";
    case FSL_INVALID_ARGUMENT: return "invalid argument";
    case FSL_CONFIG: return "config error";
    case FSL_INPUT_DATA: return "input-data error";
    case FSL_NUMERIC: return "numeric failure";
    case FSL_IO: return "i/o error";
    case FSL_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* fsl_last_error(void) { return last_error.c_str(); }

fsl_status fsl_set_workers(unsigned workers) {
  return guard([&] { set_worker_count(workers); });
}

fsl_status fsl_kernel_linear(double bias, fsl_kernel** out) {
  return guard([&] {
    require(out != nullptr, "null output handle");
    *out = new fsl_kernel{KernelSpec::linear(bias)};
  });
}

fsl_status fsl_kernel_polynomial(int degree, double bias, fsl_kernel** out) {
  return guard([&] {
    require(out != nullptr, "null output handle");
    *out = new fsl_kernel{KernelSpec::polynomial(degree, bias)};
  });
}

fsl_status fsl_kernel_gaussian(double sigma, fsl_kernel** out) {
  return guard([&] {
    require(out != nullptr, "null output handle");
    *out = new fsl_kernel{KernelSpec::gaussian(sigma)};
  });
}

fsl_status fsl_kernel_from_json(const char* json, fsl_kernel** out) {
  return guard([&] {
    require(json != nullptr && out != nullptr, "null argument");
    *out = new fsl_kernel{kernel_from_json(nlohmann::json::parse(json))};
  });
}

void fsl_kernel_free(fsl_kernel* kernel) { delete kernel; }

fsl_status fsl_kernel_eval(const fsl_kernel* kernel, const double* x, const double* y, size_t dim, double* out) {
  return guard([&] {
    require(kernel != nullptr && out != nullptr, "null argument");
    *out = eval_kernel(kernel->spec, vec_of(x, dim), vec_of(y, dim));
  });
}

fsl_status fsl_combination_create(const fsl_kernel* kernel, const double* support, size_t n, size_t dim,
                                  const double* weights, fsl_combination** out) {
  return guard([&] {
    require(kernel != nullptr && out != nullptr, "null argument");
    require(n > 0, "empty support");
    Matrix pts = rows_of(support, n, dim);
    if (weights == nullptr) {
      *out = new fsl_combination{FeatureCombination::mean(kernel->spec, std::move(pts))};
    } else {
      Vector w = Eigen::Map<const Vector>(weights, static_cast<Eigen::Index>(n));
      *out = new fsl_combination{FeatureCombination(kernel->spec, std::move(pts), std::move(w))};
    }
  });
}

void fsl_combination_free(fsl_combination* combination) { delete combination; }

fsl_status fsl_combination_self_inner(const fsl_combination* c, double* out) {
  return guard([&] {
    require(c != nullptr && out != nullptr, "null argument");
    *out = c->combo.self_inner();
  });
}

fsl_status fsl_centered_sq_norms(const fsl_combination* c, const double* points, size_t n, size_t dim, double* out) {
  return guard([&] {
    require(c != nullptr, "null combination");
    check_dim(c->combo, dim);
    copy_out(centered_sq_norms(c->combo.kernel(), rows_of(points, n, dim), c->combo), out);
  });
}

fsl_status fsl_centered_inner(const fsl_combination* c, const double* y, const double* z, size_t dim, double* out) {
  return guard([&] {
    require(c != nullptr && out != nullptr, "null argument");
    check_dim(c->combo, dim);
    *out = centered_inner(c->combo.kernel(), vec_of(y, dim), vec_of(z, dim), c->combo);
  });
}

fsl_status fsl_centered_inners(const fsl_combination* c, const fsl_combination* v, const double* points, size_t n,
                               size_t dim, double* out) {
  return guard([&] {
    require(c != nullptr && v != nullptr, "null combination");
    check_dim(c->combo, dim);
    check_dim(v->combo, dim);
    copy_out(centered_inners(c->combo.kernel(), rows_of(points, n, dim), v->combo, c->combo), out);
  });
}

fsl_status fsl_sample_domain(fsl_domain_kind kind, size_t dim, double half_width, size_t n, uint64_t seed,
                             double* out) {
  return guard([&] {
    require(out != nullptr, "null output array");
    require(dim > 0 && dim <= 1000000, "dimension out of range");
    require(kind == FSL_DOMAIN_UNIT_BALL || kind == FSL_DOMAIN_CUBE, "unknown domain kind");
    const int d = static_cast<int>(dim);
    const DomainSpec spec = kind == FSL_DOMAIN_UNIT_BALL ? DomainSpec::unit_ball(d) : DomainSpec::cube(d, half_width);
    const Sample s = sample_domain(spec, n, seed);
    std::memcpy(out, s.points.data(), sizeof(double) * n * dim);
  });
}

fsl_status fsl_enclosing_radius(const fsl_combination* c, const double* support, size_t n, size_t dim, double* out) {
  return guard([&] {
    require(c != nullptr && out != nullptr, "null argument");
    check_dim(c->combo, dim);
    *out = enclosing_radius(c->combo.kernel(), c->combo, Sample{rows_of(support, n, dim), 0}).radius;
  });
}

fsl_status fsl_ball_ratio(const fsl_combination* c, const double* probes, size_t n, size_t dim, double r, double eps,
                          double z, fsl_ratio_estimate* out) {
  return guard([&] {
    require(c != nullptr && out != nullptr, "null argument");
    check_dim(c->combo, dim);
    *out = to_c(ball_ratio_mc(c->combo.kernel(), c->combo, Sample{rows_of(probes, n, dim), 0}, r, eps, z));
  });
}

fsl_status fsl_cap_ratio(const fsl_combination* c, const fsl_combination* v, const double* probes, size_t n,
                         size_t dim, double r, double delta, double z, fsl_ratio_estimate* out) {
  return guard([&] {
    require(c != nullptr && v != nullptr && out != nullptr, "null argument");
    check_dim(c->combo, dim);
    check_dim(v->combo, dim);
    *out = to_c(cap_ratio_mc(c->combo.kernel(), c->combo, v->combo, Sample{rows_of(probes, n, dim), 0}, r, delta, z));
  });
}

fsl_status fsl_orthogonality_stats(const fsl_kernel* kernel, const double* points, size_t n, size_t dim,
                                   fsl_orthogonality* out) {
  return guard([&] {
    require(kernel != nullptr && out != nullptr, "null argument");
    const OrthogonalityStats s = orthogonality_stats(kernel->spec, Sample{rows_of(points, n, dim), 0});
    *out = {s.mean_abs_cos, s.std_cos, s.mean_norm, s.std_norm, s.pairs, s.excluded_pairs};
  });
}

fsl_status fsl_model_fit(const fsl_kernel* kernel, const double* shots, size_t k, size_t dim,
                         const fsl_combination* old_centre, fsl_model** out) {
  return guard([&] {
    require(kernel != nullptr && old_centre != nullptr && out != nullptr, "null argument");
    check_dim(old_centre->combo, dim);
    *out = new fsl_model{fit_few_shot(kernel->spec, rows_of(shots, k, dim), old_centre->combo)};
  });
}

void fsl_model_free(fsl_model* model) { delete model; }

fsl_status fsl_model_dist2(const fsl_model* model, double* out) {
  return guard([&] {
    require(model != nullptr && out != nullptr, "null argument");
    *out = model->model.dist2();
  });
}

fsl_status fsl_model_decision_values(const fsl_model* model, const double* points, size_t n, size_t dim,
                                     double* out) {
  return guard([&] {
    require(model != nullptr, "null model");
    copy_out(model->model.decision_values(rows_of(points, n, dim)), out);
  });
}

fsl_status fsl_model_classify(const fsl_model* model, const double* x, size_t dim, double theta, int* is_new) {
  return guard([&] {
    require(model != nullptr && is_new != nullptr, "null argument");
    require(static_cast<Eigen::Index>(dim) == model->model.mu().dim(), "dimension does not match the model");
    *is_new = model->model.is_new_class(vec_of(x, dim), theta) ? 1 : 0;
  });
}

fsl_status fsl_auroc(const double* pos, size_t n_pos, const double* neg, size_t n_neg, double* out) {
  return guard([&] {
    require(out != nullptr, "null output");
    require((pos != nullptr || n_pos == 0) && (neg != nullptr || n_neg == 0), "null score array");
    *out = auroc(roc_curve({pos, n_pos}, {neg, n_neg}));
  });
}

fsl_status fsl_table_read(const char* path, fsl_table** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new fsl_table{ingest_feature_csv(path)};
  });
}

fsl_status fsl_table_parse(const char* text, size_t length, const char* source, fsl_table** out) {
  return guard([&] {
    require((text != nullptr || length == 0) && out != nullptr, "null argument");
    *out = new fsl_table{parse_feature_csv(std::string_view(text ? text : "", length), source ? source : "<memory>")};
  });
}

void fsl_table_free(fsl_table* table) { delete table; }

fsl_status fsl_table_shape(const fsl_table* table, size_t* rows, size_t* width) {
  return guard([&] {
    require(table != nullptr && rows != nullptr && width != nullptr, "null argument");
    *rows = static_cast<size_t>(table->table.size());
    *width = static_cast<size_t>(table->table.width());
  });
}

fsl_status fsl_table_row(const fsl_table* table, size_t i, double* out) {
  return guard([&] {
    require(table != nullptr && out != nullptr, "null argument");
    require(i < static_cast<size_t>(table->table.size()), "row index out of range");
    const Vector row = table->table.rows.row(static_cast<Eigen::Index>(i)).transpose();
    copy_out(row, out);
  });
}

fsl_status fsl_table_label(const fsl_table* table, size_t i, const char** out) {
  return guard([&] {
    require(table != nullptr && out != nullptr, "null argument");
    require(i < table->table.labels.size(), "row index out of range");
    *out = table->table.labels[i].c_str();
  });
}

fsl_status fsl_table_checksum(const fsl_table* table, const char** out) {
  return guard([&] {
    require(table != nullptr && out != nullptr, "null argument");
    *out = table->table.checksum.c_str();
  });
}

fsl_status fsl_run_experiment(const char* command, const char* config_json, const char* out_dir,
                              char** report_json) {
  return guard([&] {
    require(command != nullptr, "null command");
    nlohmann::json config = nlohmann::json::object();
    if (config_json != nullptr && *config_json != '\0') {
      try {
        config = nlohmann::json::parse(config_json);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Config, std::string("config is not valid JSON: ") + e.what());
      }
    }
    const ExperimentOutput output = run_experiment(command, config);
    if (out_dir != nullptr) write_experiment(output, out_dir);
    if (report_json != nullptr) {
      const std::string text = output.report.dump(2);
      char* buf = static_cast<char*>(std::malloc(text.size() + 1));
      if (buf == nullptr) throw std::bad_alloc();
      std::memcpy(buf, text.c_str(), text.size() + 1);
      *report_json = buf;
    }
  });
}

void fsl_string_free(char* s) { std::free(s); }

}  // extern "C"
