/* Prints the metric report of one run.
 *
 *   cargo build -p topicscope-ffi
 *   cc -Icrates/ffi/include crates/ffi/examples/report.c \
 *      -Ltarget/debug -ltopicscope_ffi -o report
 *   LD_LIBRARY_PATH=target/debug ./report corpus.json run.json 3 3
 */
#include <stdio.h>
#include <stdlib.h>

#include "topicscope.h"

static int fail(TsStatus status) {
    const char *msg = ts_last_error_message();
    fprintf(stderr, "error %d: %s\n", (int)status, msg ? msg : "(none)");
    return (int)status;
}

int main(int argc, char **argv) {
    if (argc != 5) {
        fprintf(stderr, "usage: %s CORPUS RUN TOP_K NGRAMS_PER_TOPIC\n", argv[0]);
        return 2;
    }
    TsCorpus *corpus = NULL;
    TsRun *run = NULL;
    TsMetricReport report;
    TsStatus status;

    if ((status = ts_corpus_load(argv[1], &corpus)) != TS_STATUS_OK)
        return fail(status);
    if ((status = ts_run_load(argv[2], &run)) != TS_STATUS_OK) {
        ts_corpus_free(corpus);
        return fail(status);
    }
    status = ts_metric_report(run, corpus, strtoul(argv[3], NULL, 10), strtoul(argv[4], NULL, 10), &report);
    ts_run_free(run);
    ts_corpus_free(corpus);
    if (status != TS_STATUS_OK)
        return fail(status);

    printf("gini=%.4f nfs=%.4f nuv=%.4f puv=%.4f npmi=%.4f coverage=%.1f%% error_size=%zu\n",
           report.gini, report.nfs, report.nuv, report.puv, report.coherence_npmi,
           report.coverage_pct, report.error_size);
    return 0;
}
