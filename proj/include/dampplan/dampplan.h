/* C interface to the damping planner: opaque handles, status codes and a
 * per-thread last-error message. */
#ifndef DAMPPLAN_H
#define DAMPPLAN_H

#include <stddef.h>

#if defined(_WIN32)
#define DP_API __declspec(dllexport)
#else
#define DP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dp_status {
  DP_OK = 0,
  DP_ERR_INVALID_ARGUMENT = 1,
  DP_ERR_PARSE = 2,
  DP_ERR_VALIDATION = 3,
  DP_ERR_POLE_HIT = 4,
  DP_ERR_SINGULAR_BLOCK = 5,
  DP_ERR_SINGULAR_BRANCH = 6,
  DP_ERR_OUT_OF_RANGE = 7,
  DP_ERR_NON_CONVERGENCE = 8,
  DP_ERR_INFEASIBLE = 9,
  DP_ERR_IO = 10,
  DP_ERR_INTERNAL = 99
} dp_status;

typedef struct dp_network dp_network;
typedef struct dp_analysis dp_analysis;

typedef struct dp_crossover {
  int trace_id;
  double f_cr_hz;
  double re_lambda;
  double im_lambda;
  int critical;          /* 1 if Re <= 0 at the crossover */
  int positive_to_negative;
} dp_crossover;

typedef enum dp_ad_mode { DP_AD_PROPOSED = 0, DP_AD_TRADITIONAL = 1 } dp_ad_mode;

typedef struct dp_ad_params {
  double v_dc_v;
  double l_f_h;
  double k_pi;
  double k_ii;
  double xi;
  double tau_s;
  double beta;
  double omega_low_rad_s;
  double omega_c_rad_s;
  double g_s;
  double k_v;
  double f_s_hz;
  dp_ad_mode mode;
} dp_ad_params;

typedef struct dp_run_config {
  const char* network_path; /* may be NULL for ad-curve */
  double fmin_hz;
  double fmax_hz;
  double df_hz;
  double epsilon_s;
  double delta_alpha_s;
  int has_node;
  int node;
  int has_design_node;
  int design_node;
  int ad_mode; /* -1 keeps the network's mode */
  int has_k_v;
  double k_v;
  const char* out_dir; /* NULL = current directory */
  unsigned threads;    /* 0 = default */
} dp_run_config;

DP_API const char* dp_version(void);
/* Message of the last failed call on this thread; "" if none. */
DP_API const char* dp_last_error(void);
DP_API const char* dp_status_name(dp_status s);

DP_API dp_status dp_network_load(const char* path, dp_network** out);
DP_API dp_status dp_network_parse(const char* json_text, dp_network** out);
DP_API dp_status dp_network_case_study(dp_network** out);
DP_API dp_status dp_emit_fixture(const char* path);
DP_API void dp_network_free(dp_network* n);
DP_API size_t dp_network_node_count(const dp_network* n);
DP_API dp_status dp_network_node_id(const dp_network* n, size_t index, int* out);
/* Row-major 2n x 2n matrix, interleaved (re, im); capacity counts doubles. */
DP_API dp_status dp_network_assemble(const dp_network* n, double f_hz, double* out, size_t capacity);

DP_API dp_status dp_analyze(const dp_network* n, double fmin_hz, double fmax_hz, double df_hz, dp_analysis** out);
DP_API void dp_analysis_free(dp_analysis* a);
DP_API int dp_analysis_stable(const dp_analysis* a);
DP_API size_t dp_analysis_crossover_count(const dp_analysis* a);
DP_API dp_status dp_analysis_crossover(const dp_analysis* a, size_t index, dp_crossover* out);
DP_API dp_status dp_analysis_compensation_coefficient(const dp_analysis* a, size_t crossover, size_t node_index,
                                                      double* re, double* im);

DP_API void dp_ad_params_default(dp_ad_params* p);
DP_API dp_status dp_ad_admittance(const dp_ad_params* p, double f_hz, double* re, double* im);
/* Smallest K_v meeting Re[Y_ad] >= requirement and |Im/Re| <= 0.1 on the band. */
DP_API dp_status dp_calibrate_ad(const dp_ad_params* base, double requirement_s, double band_lo_hz,
                                 double band_hi_hz, double* k_v);

DP_API void dp_run_config_default(dp_run_config* c);
/* command: sweep | criticals | rank | plan | ad-curve | verify. exit_code gets
 * 0 (stable or no verdict) or 2 (unstable). report_json, if not NULL, gets a
 * string to release with dp_string_free. */
DP_API dp_status dp_run_command(const dp_run_config* c, const char* command, int* exit_code, char** report_json);
DP_API void dp_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
