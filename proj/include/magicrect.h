#ifndef MAGICRECT_H
#define MAGICRECT_H

/* C interface to the magic-rectangle protocol library. All functions return
 * a status code; constructors hand back opaque handles the caller frees.
 * Structured results come as mr_report handles carrying a JSON document.
 * Handles are not thread-safe to mutate concurrently, but distinct handles
 * may be used from distinct threads; mr_last_error is per thread. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef MR_API
#if defined(_WIN32)
#ifdef MR_BUILDING_SHARED
#define MR_API __declspec(dllexport)
#else
#define MR_API __declspec(dllimport)
#endif
#else
#define MR_API __attribute__((visibility("default")))
#endif
#endif

typedef enum mr_status {
    MR_OK = 0,
    MR_ERR_INVALID_ARGUMENT = 1,
    MR_ERR_UNSUPPORTED = 2,
    MR_ERR_IO = 3,
    MR_ERR_PROTOCOL = 4,
    MR_ERR_INTERNAL = 5
} mr_status;

typedef struct mr_device mr_device;
typedef struct mr_transcript mr_transcript;
typedef struct mr_report mr_report;

MR_API const char* mr_version(void);

/* Message for the calling thread's most recent failed call; "" when the
 * last call on this thread succeeded. The pointer stays valid until the
 * thread's next library call. */
MR_API const char* mr_last_error(void);

/* Builds a device from a JSON descriptor. Shorthand forms:
 *   {"kind":"honest","n":7,"noise":{"kind":"uniform","theta":0.1}}
 *   {"kind":"baseline-square"}
 *   {"kind":"padded","n":7}
 *   {"file":"path/to/device.json"}
 * Anything else must be a full custom descriptor with explicit measurement
 * plans (see the device file format in the README). */
MR_API mr_status mr_device_create(const char* descriptor_json, mr_device** out);
MR_API void mr_device_free(mr_device* dev);

/* Report: {"kind":"device","name":...,"device-kind":...,"pairs":...,
 *          "wire-compatible":...} */
MR_API mr_status mr_device_describe(const mr_device* dev, mr_report** out);

/* Runs the protocol in process. config_json may be NULL or an object with
 * optional fields {"seed","rounds","mix":{"game","local","pair"},"threads"};
 * the number of pairs always comes from the device. */
MR_API mr_status mr_run_protocol(const mr_device* dev, const char* config_json,
                                 mr_transcript** out);

MR_API mr_status mr_transcript_save(const mr_transcript* t, const char* path);
MR_API mr_status mr_transcript_load(const char* path, mr_transcript** out);

/* Report: {"kind":"transcript-summary","n","seed","rounds","accepted",
 *          "voided","device","mix":{...}} */
MR_API mr_status mr_transcript_summary(const mr_transcript* t, mr_report** out);
MR_API void mr_transcript_free(mr_transcript* t);

/* Per-family epsilon estimates with Hoeffding widths at confidence
 * 1 - alpha. Report: the estimator's JSON document. */
MR_API mr_status mr_estimate(const mr_transcript* t, double alpha, mr_report** out);

/* Closed-form bound catalog for n = 3 or n = 7, 11, 15, ... given the three
 * test epsilons. Report: bound-report JSON lines. */
MR_API mr_status mr_bound_catalog(int n, double eps0, double eps1, double eps2,
                                  mr_report** out);

/* Numerically verifies every catalog bound against exact state norms for an
 * honest device (n in {3,7,11}). options_json may be NULL or
 * {"inject_bug":bool,"max_instances":int,"sigma_samples":int,
 *  "sample_seed":int,"threads":int}. Non-honest devices are unsupported. */
MR_API mr_status mr_ledger_verify(const mr_device* dev, const char* options_json,
                                  mr_report** out);

/* The certified robustness radius delta(n, eps) when all three test
 * epsilons equal eps. */
MR_API mr_status mr_final_robustness(int n, double eps, double* out_delta);

/* Exact classical value of a sign-rectangle game, as a reduced fraction.
 * game_json: {"alpha":[...],"beta":[...]} with entries +1/-1. */
MR_API mr_status mr_classical_value(const char* game_json, long long* out_num,
                                    long long* out_den);

/* Round-robin edge coloring of K_n used by the pair checks (odd n >= 3).
 * Report: {"kind":"coloring","n",...,"proper":true,"classes":[
 *          {"color":v,"edges":[[i,j],...]},...]} */
MR_API mr_status mr_coloring(int n, mr_report** out);

/* Exact expectation of alice (x) bob on the device's shared state. Each
 * operator is a Pauli string such as "XIZ" or "-i XY_Z"; both must act on
 * the device's number of pairs. */
MR_API mr_status mr_bell_expectation(const mr_device* dev, const char* alice,
                                     const char* bob, double* out);

/* ---- wire endpoints (blocking; loopback TCP) --------------------------- */

/* Hosts a referee session and, by default, the shared-state service the
 * provers measure through. config_json fields (all optional):
 *   {"n":3,"seed":1,"rounds":1000,"mix":{...},"port":0,"state_port":0,
 *    "state_service":true,"noise":{...},"alpha":0.01,
 *    "transcript_path":"...","report_path":"...",
 *    "hello_timeout_ms":30000,"answer_timeout_ms":10000}
 * Port 0 picks an ephemeral port; the bound ports are printed to stdout as
 * "referee port N" / "state port N" before provers are accepted. Returns
 * after the session with a transcript-summary report. */
MR_API mr_status mr_serve_referee(const char* config_json, mr_report** out);

/* Runs one prover endpoint until the referee ends the session.
 * config_json: {"role":"A"|"B","host":"127.0.0.1","port":N,
 *               "state_host":"127.0.0.1","state_port":M,
 *               "timeout_ms":120000,"retries":25,"retry_delay_ms":200}
 * Report: {"kind":"prover-stats","role","answered","accepted"}.
 * Devices whose plans are not plain Pauli strings are unsupported. */
MR_API mr_status mr_run_prover(const mr_device* dev, const char* config_json,
                               mr_report** out);

/* Hosts a standalone shared-state service for one session.
 * config_json: {"n":3,"seed":1,"noise":{...},"port":0,
 *               "request_timeout_ms":120000}. The bound port is printed as
 * "state port N". Returns when both provers hang up. */
MR_API mr_status mr_run_state_service(const char* config_json);

/* The report's JSON text; owned by the report handle. */
MR_API const char* mr_report_json(const mr_report* rep);
MR_API void mr_report_free(mr_report* rep);

#ifdef __cplusplus
}
#endif

#endif /* MAGICRECT_H */
