from .crf import (
    CrfModel,
    CrfTemplate,
    LinearChainCRF,
    crf_gradient,
    crf_log_partition,
    crf_objective,
    crf_score_table,
    crf_train,
    crf_viterbi,
    forward_backward,
    path_score,
    viterbi_decode,
)
from .linear import (
    LinearModel,
    LinearSVMClassifier,
    LogisticRegressionClassifier,
    predict_linear,
    softmax,
    train_logreg,
    train_svm,
)
