# Sparse and dense codes over a class-arranged dictionary
# ======================================================
#
# Training features become dictionary columns, grouped by class. A test
# feature is coded twice: sparsely with orthogonal matching pursuit and
# densely with ridge regression. The two codes are normalized, summed,
# pooled per class and added to the classifier's softmax scores.

import numpy as np

from modelaug import (ClassScores, build_dictionary, dense_encode, fuse, omp_encode, pool_by_class,
                      predict)
from modelaug.synthetic import gaussian_features

train = gaussian_features(50, dim=8, separation=6.0, seed=0)
d = build_dictionary(train)
print("dictionary:", d.columns.shape, "spans:", d.class_spans)

# a class-1 sample the network is unsure about
s = gaussian_features(1, dim=8, separation=6.0, seed=99)[1].features

sparse = omp_encode(d, s, k=50)
print(f"OMP picked {len(sparse.support)} columns, stopped on {sparse.status!r}")
print("residual trace:", np.round(sparse.residual_trace, 4))

dense = dense_encode(d, s, lam=2.0)
print("dense code: largest |coefficient| at column", int(np.argmax(np.abs(dense.coefficients))))

fused = fuse(sparse, dense)
pooled = pool_by_class(fused, d)
print("pooled class scores:", np.round(pooled.scores, 3))

softmax = ClassScores(d.classes, [0.55, 0.45])
print("softmax alone ->", predict(softmax, ClassScores(d.classes, [0, 0])))
print("augmented     ->", predict(softmax, pooled))

# the pooled scores can be damped for ablations
for w in (0.0, 0.05, 0.2, 1.0):
    print(f"weight {w:4.2f} -> class {predict(softmax, pooled, weight=w)}")
