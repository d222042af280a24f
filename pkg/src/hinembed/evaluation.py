"""Node classification, clustering and similarity-search evaluation.

Metric definitions used here:

* classification accuracy is micro accuracy (fraction of test nodes right)
  of a one-vs-rest L2-regularized logistic regression;
* clustering accuracy matches clusters to classes with the Hungarian
  algorithm; F is the pairwise F1 over node pairs placed in the same
  cluster; NMI normalizes mutual information by the arithmetic mean of the
  two entropies;
* precision@k is the share of a query's k most cosine-similar nodes that
  carry the query's label, ties broken by ascending node index.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize
from scipy.special import expit, log_expit
from sklearn.cluster import KMeans

from .errors import EvaluationError


@dataclass
class EvalReport:
    """Per-repetition values of one or more metrics for one task."""

    task: str
    params: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    def mean(self, metric=None) -> float:
        return float(np.mean(self.values[metric or self._only()]))

    def std(self, metric=None) -> float:
        return float(np.std(self.values[metric or self._only()]))

    def _only(self):
        if len(self.values) != 1:
            raise KeyError("report holds several metrics; name one")
        return next(iter(self.values))

    def to_text(self) -> str:
        head = f"{self.task}  " + "  ".join(f"{k}={v}" for k, v in self.params.items())
        rows = [("metric", "mean", "std", "n")]
        rows += [(m, f"{np.mean(v):.4f}", f"{np.std(v):.4f}", str(len(v))) for m, v in self.values.items()]
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = [head] + ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
                          for r in rows]
        return "\n".join(lines) + "\n"

    def to_kv(self) -> str:
        params = " ".join(f"{k}={v}" for k, v in self.params.items())
        lines = []
        for m, v in self.values.items():
            vals = ",".join(f"{x:.6f}" for x in v)
            lines.append(f"task={self.task} {params} metric={m} mean={np.mean(v):.6f} "
                         f"std={np.std(v):.6f} n={len(v)} values={vals}".replace("  ", " "))
        return "\n".join(lines) + "\n"


class OneVsRestLogistic:
    """One binary L2-regularized logistic regression per class.

    Each binary problem minimizes ``C * sum(log(1 + exp(-y (x.w + b)))) +
    |w|^2 / 2`` with L-BFGS under a fixed iteration budget; the intercept is
    not penalized. Prediction takes the class with the largest margin.
    """

    def __init__(self, C=1.0, max_iter=500):
        self.C = C
        self.max_iter = max_iter

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        self.classes_ = np.unique(y)
        if self.classes_.size < 2:
            raise EvaluationError("need at least two classes")
        d = X.shape[1]
        self.coef_ = np.zeros((self.classes_.size, d))
        self.intercept_ = np.zeros(self.classes_.size)
        for k, c in enumerate(self.classes_):
            sign = np.where(y == c, 1.0, -1.0)

            def loss(theta):
                w, b = theta[:d], theta[d]
                z = sign * (X @ w + b)
                value = -self.C * log_expit(z).sum() + 0.5 * w @ w
                g = -self.C * sign * expit(-z)
                return value, np.append(X.T @ g + w, g.sum())

            res = minimize(loss, np.zeros(d + 1), jac=True, method="L-BFGS-B",
                           options={"maxiter": self.max_iter, "gtol": 1e-8, "ftol": 1e-12})
            self.coef_[k], self.intercept_[k] = res.x[:d], res.x[d]
        return self

    def decision_function(self, X):
        return np.asarray(X) @ self.coef_.T + self.intercept_

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


def _split(y, n_train, rng, attempts=1000):
    classes = np.unique(y)
    for _ in range(attempts):
        perm = rng.permutation(y.size)
        train, test = perm[:n_train], perm[n_train:]
        if np.unique(y[train]).size == classes.size:
            return train, test
    raise EvaluationError("could not draw a training split covering every class")


def classify(embeddings, labels, train_ratio=0.05, repetitions=10, seed=0, C=1.0, max_iter=500,
             classifier=None) -> EvalReport:
    """Mean test accuracy over ``repetitions`` random train/test splits.

    Splits missing a class in the training part are redrawn. ``classifier``
    replaces the built-in one; it must offer ``fit`` and ``predict``.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels)
    if np.unique(y).size < 2:
        raise EvaluationError("classification needs at least two classes")
    if not 0.0 < train_ratio < 1.0:
        raise EvaluationError("train_ratio must lie in (0, 1)")
    n_train = int(round(train_ratio * y.size))
    if n_train < np.unique(y).size or n_train >= y.size:
        raise EvaluationError(f"train split of {n_train} nodes cannot cover every class and leave a test set")
    accs = []
    for rep in range(repetitions):
        rng = np.random.default_rng([seed, rep])
        train, test = _split(y, n_train, rng)
        model = classifier() if classifier else OneVsRestLogistic(C, max_iter)
        model.fit(X[train], y[train])
        accs.append(float(np.mean(model.predict(X[test]) == y[test])))
    return EvalReport("classify", {"train_ratio": train_ratio, "repetitions": repetitions, "seed": seed},
                      {"accuracy": accs})


def _contingency(a, b):
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def clustering_accuracy(true, pred) -> float:
    """Accuracy under the best one-to-one cluster-to-class assignment."""
    table = _contingency(pred, true)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / len(true))


def pairwise_f1(true, pred) -> float:
    """F1 of "same cluster" against "same class" over all node pairs."""
    table = _contingency(pred, true)
    pairs = lambda x: (x * (x - 1) // 2).sum()  # noqa: E731
    both = pairs(table)
    in_pred, in_true = pairs(table.sum(axis=1)), pairs(table.sum(axis=0))
    if both == 0:
        return 1.0 if in_pred == in_true == 0 else 0.0
    precision, recall = both / in_pred, both / in_true
    return float(2 * precision * recall / (precision + recall))


def nmi(a, b) -> float:
    """Mutual information over the arithmetic mean of the entropies."""
    table = _contingency(a, b).astype(np.float64)
    n = table.sum()
    pa, pb = table.sum(axis=1) / n, table.sum(axis=0) / n
    ha = -np.sum(pa * np.log(pa))
    hb = -np.sum(pb * np.log(pb))
    nz = table > 0
    pij = table[nz] / n
    mi = np.sum(pij * (np.log(pij) - np.log(np.outer(pa, pb)[nz])))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    return float(max(mi, 0.0) / (0.5 * (ha + hb)))


def cluster(embeddings, labels, k=None, seed=0, n_init=10) -> dict:
    """k-means (k-means++ seeding, best of ``n_init`` runs) scored against labels."""
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels)
    k = np.unique(y).size if k is None else k
    if k < 2:
        raise EvaluationError("k must be >= 2")
    if k > X.shape[0]:
        raise EvaluationError(f"k={k} exceeds the {X.shape[0]} nodes")
    pred = KMeans(n_clusters=k, init="k-means++", n_init=n_init, random_state=seed).fit_predict(X)
    return {"accuracy": clustering_accuracy(y, pred), "F": pairwise_f1(y, pred), "NMI": nmi(y, pred)}


def cluster_report(embeddings, labels, k=None, seeds=(0,)) -> EvalReport:
    runs = [cluster(embeddings, labels, k, s) for s in seeds]
    return EvalReport("cluster", {"k": k or np.unique(labels).size, "seeds": len(runs)},
                      {m: [r[m] for r in runs] for m in ("accuracy", "F", "NMI")})


def ranked_neighbors(embeddings, query: int) -> np.ndarray:
    """All other rows by descending cosine similarity, then ascending index."""
    X = np.asarray(embeddings, dtype=np.float64)
    Xn = X / np.linalg.norm(X, axis=1, keepdims=True)
    sims = Xn @ Xn[query]
    order = np.lexsort((np.arange(X.shape[0]), -sims))
    return order[order != query]


def search_precision(embeddings, labels, k_list=(100,), n_queries=1000, seed=0) -> EvalReport:
    """Mean precision@k over ``n_queries`` random query nodes.

    Rows with zero norm have no cosine similarity; they are dropped with a
    warning before queries are drawn.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels)
    norms = np.linalg.norm(X, axis=1)
    keep = norms > 0
    if not keep.all():
        warnings.warn(f"excluding {int((~keep).sum())} zero-norm embedding rows from similarity search")
        X, y, norms = X[keep], y[keep], norms[keep]
    n = X.shape[0]
    k_list = sorted(int(k) for k in k_list)
    if n_queries > n:
        raise EvaluationError(f"{n_queries} queries requested from {n} nodes")
    if k_list and k_list[-1] >= n:
        raise EvaluationError(f"k={k_list[-1]} must be smaller than the {n} nodes")
    rng = np.random.default_rng(seed)
    queries = rng.choice(n, size=n_queries, replace=False)
    Xn = X / norms[:, None]
    hits = {k: [] for k in k_list}
    index = np.arange(n)
    for start in range(0, n_queries, 256):
        batch = queries[start:start + 256]
        sims = Xn[batch] @ Xn.T
        for q, row in zip(batch, sims):
            order = np.lexsort((index, -row))
            order = order[order != q]
            same = y[order[:k_list[-1]]] == y[q]
            for k in k_list:
                hits[k].append(same[:k].mean())
    return EvalReport("search", {"queries": n_queries, "seed": seed},
                      {f"precision@{k}": [float(np.mean(v))] for k, v in hits.items()})
