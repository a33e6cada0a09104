/* Scores a synthetic table through the C interface.
   usage: smoke <dump-dir> */
#include <stdio.h>
#include <stdlib.h>
#include "cqa.h"

static int fail(const char *what, CqaStatus st) {
    char msg[512];
    cqa_last_error_message(msg, sizeof msg);
    fprintf(stderr, "%s failed (%d): %s\n", what, (int)st, msg);
    return 1;
}

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: %s <dump-dir>\n", argv[0]);
        return 2;
    }
    CqaDataset *ds = NULL;
    CqaStatus st = cqa_dataset_read_dump(argv[1], &ds);
    if (st != CQA_STATUS_OK) return fail("read_dump", st);

    CqaFeatureTable *all = NULL, *t = NULL;
    if ((st = cqa_features_build(ds, &all)) != CQA_STATUS_OK) return fail("features_build", st);
    if ((st = cqa_features_select(all, "S,UR", true, &t)) != CQA_STATUS_OK) return fail("features_select", st);

    size_t n = cqa_features_row_count(t);
    double *labels = malloc(n * sizeof *labels);
    double *scores = malloc(n * sizeof *scores);
    cqa_features_labels(t, labels, n);

    CqaModel *m = NULL;
    if ((st = cqa_model_train(t, 50, 0.0, 1, &m)) != CQA_STATUS_OK) return fail("model_train", st);
    if ((st = cqa_model_predict_table(m, t, scores, n)) != CQA_STATUS_OK) return fail("predict", st);

    double auc = 0.0;
    if ((st = cqa_auc(scores, labels, n, &auc)) != CQA_STATUS_OK) return fail("auc", st);
    printf("version %s rows %zu features %zu auc %.4f\n", cqa_version(), n, cqa_model_feature_count(m), auc);

    /* errors come back as codes, never aborts */
    double one = 0.0;
    if (cqa_model_predict(m, labels, 1, &one) != CQA_STATUS_DIMENSION) return 1;

    free(labels);
    free(scores);
    cqa_model_free(m);
    cqa_features_free(t);
    cqa_features_free(all);
    cqa_dataset_free(ds);
    return 0;
}
