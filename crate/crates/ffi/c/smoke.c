#include <stdio.h>
#include "gibbs_tree.h"

int main(void) {
    GtKernel *k = NULL;
    if (gt_kernel_new_preset("ehr12-k2", 32, "gauss-split", &k) != GT_STATUS_OK) {
        fprintf(stderr, "%s\n", gt_last_error());
        return 1;
    }
    GtFieldList *fps = NULL;
    if (gt_find_ti(k, 2, 1e-10, 10000, &fps) != GT_STATUS_OK) {
        fprintf(stderr, "%s\n", gt_last_error());
        return 1;
    }
    GtField *h = NULL;
    gt_field_list_get(fps, gt_field_list_len(fps) - 1, &h);
    GtVertexField *vf = NULL;
    gt_vertex_field_ti(h, 2, 4, true, &vf);
    double res = -1.0;
    gt_residual(k, vf, &res);
    printf("fixed_points=%zu residual=%.3e\n", gt_field_list_len(fps), res);
    if (gt_kernel_new_preset("bogus", 32, "gauss-split", &k) != GT_STATUS_CONFIG) {
        return 2;
    }
    gt_vertex_field_free(vf);
    gt_field_free(h);
    gt_field_list_free(fps);
    gt_kernel_free(k);
    return res < 1e-9 ? 0 : 3;
}
