/* C interface to the tessellate co-simulation engine.
 *
 * Every function returns a tsl_status; on failure tsl_last_error() holds a
 * message for the calling thread. Strings handed out through char** must be
 * released with tsl_string_free(). Handles are not thread-safe unless noted.
 */
#ifndef TESSELLATE_TESSELLATE_H
#define TESSELLATE_TESSELLATE_H

#include <stddef.h>
#include <stdint.h>

#if defined(TSL_BUILDING_LIBRARY)
#define TSL_API __attribute__((visibility("default")))
#else
#define TSL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tsl_status {
  TSL_OK = 0,
  TSL_ERR_INVALID_ARGUMENT = 1,
  TSL_ERR_IO = 2,
  TSL_ERR_PARSE = 3,
  TSL_ERR_REGISTRY = 4,
  TSL_ERR_BAKE_PROBLEMS = 5, /* baked, but some elements failed or are blocked */
  TSL_ERR_CYCLE = 6,         /* non-delayed dataflow cycle */
  TSL_ERR_RUN = 7,           /* a simulator failed during the run */
  TSL_ERR_SERVE = 8,
  TSL_ERR_STATE = 9,
  TSL_ERR_INTERNAL = 10
} tsl_status;

TSL_API const char* tsl_version(void);
TSL_API const char* tsl_status_string(tsl_status status);
TSL_API const char* tsl_last_error(void);
TSL_API void tsl_string_free(char* s);

/* Simulator registry and the in-process simulator catalog. A NULL path falls
 * back to $TESSELLATE_REGISTRY, then to the built-in reference simulators. */
typedef struct tsl_engine tsl_engine;

TSL_API tsl_status tsl_engine_create(const char* registry_path, tsl_engine** out);
TSL_API void tsl_engine_destroy(tsl_engine* engine);
TSL_API tsl_status tsl_engine_registry_json(const tsl_engine* engine, char** out_json);

/* A scenario file and its baked orbit. Relative file names inside the
 * scenario resolve against the scenario file's directory. */
typedef struct tsl_scenario tsl_scenario;

TSL_API tsl_status tsl_scenario_load(tsl_engine* engine, const char* path, tsl_scenario** out);
TSL_API void tsl_scenario_destroy(tsl_scenario* scenario);

/* Fresh bake; rebakes from scratch when called again. Returns
 * TSL_ERR_BAKE_PROBLEMS when any element failed. */
TSL_API tsl_status tsl_scenario_bake(tsl_scenario* scenario, size_t* problem_count);
TSL_API tsl_status tsl_scenario_report(const tsl_scenario* scenario, int include_pairs, char** out_json);

/* Receives one JSON-encoded run event per call. */
typedef void (*tsl_event_fn)(const char* event_json, void* user);

/* Runs the baked orbit. end_time <= 0 keeps the scenario's end time;
 * real_time_factor < 0 keeps the scenario's factor, 0 runs unpaced. Bakes
 * first if needed; a second run rebakes. */
TSL_API tsl_status tsl_scenario_run(tsl_scenario* scenario, int64_t end_time, double real_time_factor,
                                    tsl_event_fn on_event, void* user);

/* Websocket gateway. tsl_gateway_stop may be called from any thread. */
typedef struct tsl_gateway tsl_gateway;

TSL_API tsl_status tsl_gateway_start(tsl_engine* engine, const char* host, uint16_t port, const char* scenario_path,
                                     tsl_gateway** out);
TSL_API uint16_t tsl_gateway_port(const tsl_gateway* gateway);
TSL_API void tsl_gateway_wait(tsl_gateway* gateway);
TSL_API void tsl_gateway_stop(tsl_gateway* gateway);
TSL_API void tsl_gateway_destroy(tsl_gateway* gateway);

#ifdef __cplusplus
}
#endif

#endif
