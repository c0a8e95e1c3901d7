#include <stdio.h>
#include <string.h>
#include "kgforge.h"

int main(void) {
    KgfEngine *engine = NULL;
    if (kgf_engine_open(NULL, &engine) != KGF_STATUS_OK) {
        fprintf(stderr, "open: %s\n", kgf_last_error_message());
        return 1;
    }
    char *out = NULL;
    if (kgf_search(engine, "", 5, &out) != KGF_STATUS_BAD_REQUEST || kgf_last_error_message() == NULL) {
        return 2;
    }
    const char *req = "{\"sessionId\":\"c1\",\"docId\":\"d\",\"text\":\"hello\"}";
    if (kgf_session_create(engine, req, &out) != KGF_STATUS_OK || strstr(out, "\"c1\"") == NULL) {
        return 3;
    }
    kgf_string_free(out);
    if (kgf_session_advance(engine, "c1", &out) != KGF_STATUS_CONFLICT) {
        return 4;
    }
    double p = 0.0;
    kgf_confidence(0.5, 1, 0, 0.1, 1, &p);
    printf("%.17g %s\n", p, kgf_version());
    kgf_engine_free(engine);
    return 0;
}
