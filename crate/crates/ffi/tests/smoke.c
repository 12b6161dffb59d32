#include <stdio.h>
#include <math.h>
#include "rolemodel.h"

#define CHECK(cond)                                               \
    do {                                                          \
        if (!(cond)) {                                            \
            char msg[256];                                        \
            rm_last_error(msg, sizeof msg);                       \
            fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond, msg); \
            return 1;                                             \
        }                                                         \
    } while (0)

int main(void) {
    /* uniform input, two Z-channels with crossover 1/2 */
    const double prior[2] = {0.5, 0.5};
    const double half[4] = {1.0, 0.0, 0.5, 0.5};
    RmJoint *joint = NULL;
    CHECK(rm_joint_from_chain(2, 2, 2, prior, half, half, &joint) == RM_STATUS_OK);

    RmEstimator *est = NULL;
    CHECK(rm_role_model_exact(joint, &est) == RM_STATUS_OK);
    double q0 = 0.0;
    CHECK(rm_estimator_get(est, 0, 0, &q0) == RM_STATUS_OK);
    CHECK(fabs(q0 - 4.0 / 7.0) < 1e-12);

    RmTheoremCheck check;
    CHECK(rm_check_theorem1(joint, est, &check) == RM_STATUS_OK);
    CHECK(check.passed);

    RmTrainerConfig config = rm_trainer_config_default();
    config.n_samples = 2000;
    RmEstimator *trained = NULL;
    CHECK(rm_train_on_joint(joint, &config, &trained) == RM_STATUS_OK);

    CHECK(rm_estimator_get(est, 5, 0, &q0) == RM_STATUS_DIMENSION);
    CHECK(rm_last_error(NULL, 0) > 0);

    rm_estimator_free(trained);
    rm_estimator_free(est);
    rm_joint_free(joint);
    printf("smoke ok\n");
    return 0;
}
