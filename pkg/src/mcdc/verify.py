"""Self-verification: gradient checks, attention-map stochasticity, oracle
equivalences and determinism, runnable from a fresh checkout in a couple of
minutes. Each check returns (name, passed, detail); the CLI turns any failure
into a nonzero exit code.

The conv gradient check doubles as a negative control: with fault injection
armed (verify --inject-fault conv-kernel-grad) it must fail.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .attention import attention_map, new_cnn_head
from .baselines import AnnHyper, AnnModel
from .conditions import by_code
from .data import CdgdWindow
from .evaluation import roc_auc, wilcoxon_rank_sum
from .model import McdcModel, ModelHyper
from .tensor import Tape, backward, conv1d, cross_entropy, grad_check, matmul, sum_all, sigmoid, tensor
from .training import TrainConfig, train_fold

__all__ = ["run_checks"]


def _naive_conv(signal, kernel, stride, pad):
    rows, length = signal.shape
    padded = np.zeros((rows, length + 2 * pad))
    padded[:, pad:pad + length] = signal
    out_len = (padded.shape[1] - kernel.size) // stride + 1
    out = np.zeros((rows, out_len))
    for r in range(rows):
        for j in range(out_len):
            for t in range(kernel.size):
                out[r, j] += padded[r, j * stride + t] * kernel[t]
    return out


def _check_conv_oracle():
    rng = np.random.default_rng(100)
    for _ in range(30):
        length = int(rng.integers(1, 12))
        k = int(rng.integers(1, 7))
        stride = int(rng.integers(1, 4))
        pad = int(rng.integers(0, 4))
        if length + 2 * pad < k:
            continue
        sig = rng.normal(size=(int(rng.integers(1, 5)), length))
        kern = rng.normal(size=k)
        ours = conv1d(tensor(sig), tensor(kern), stride, pad).data
        if not np.array_equal(ours, _naive_conv(sig, kern, stride, pad)):
            return False, f"conv mismatch at L={length} k={k} s={stride} p={pad}"
    return True, "30 geometries exact"


def _check_matmul_oracle():
    rng = np.random.default_rng(101)
    for _ in range(20):
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(4, 2))
        ours = matmul(tensor(a), tensor(b)).data
        naive = np.array([[sum(a[i, t] * b[t, j] for t in range(4)) for j in range(2)] for i in range(3)])
        if not np.allclose(ours, naive, atol=1e-12):
            return False, "matmul mismatch"
    return True, "20 instances within 1e-12"


def _grad_check_model(model, window, label):
    params = [p for _, p in model.parameters()]
    return grad_check(lambda: cross_entropy(model.forward(window), label), params)


def _check_gradients():
    rng = np.random.default_rng(102)
    window = rng.normal(size=(5, 8))
    hyper = ModelHyper(temporal_len=8, heads=2, kernel_temporal=3, kernel_channel=4, ffn_hidden=4)
    worst = 0.0
    for variant in ("conv", "matrix"):
        model = McdcModel(
            ModelHyper(**{**hyper.to_dict(), "attention": variant}), seed=7
        )
        worst = max(worst, _grad_check_model(model, window, 2))
    ann = AnnModel(AnnHyper(temporal_len=8, hidden1=4, hidden2=3), seed=8)
    worst = max(worst, _grad_check_model(ann, window, 5))
    return worst < 1e-4, f"max relative error {worst:.2e}"


def _check_attention_stochastic():
    rng = np.random.default_rng(103)
    head_t = new_cnn_head(5, np.random.default_rng(9))
    head_c = new_cnn_head(6, np.random.default_rng(10))
    for _ in range(200):
        x = rng.normal(scale=3.0, size=(5, 8))
        for inp, head in ((x, head_t), (x.T, head_c)):
            from .attention import cnn_qkv

            q, k, _ = cnn_qkv(tensor(inp), head)
            amap = attention_map(q, k).data
            if not np.allclose(amap.sum(axis=0), 1.0, atol=1e-9):
                return False, "column sums off"
            if amap.min() < 0.0 or amap.max() > 1.0:
                return False, "entries outside [0,1]"
    return True, "200 inputs per route"


def _check_auc_rank_equivalence():
    rng = np.random.default_rng(104)
    for _ in range(30):
        n = int(rng.integers(5, 25))
        scores = rng.integers(0, 8, size=n) / 8.0
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        probs = np.stack([1.0 - scores, scores], axis=1)
        auc = roc_auc(labels, probs)["per_class_auc"][1]
        pos, neg = scores[labels == 1], scores[labels == 0]
        u = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
        if abs(auc - u / (len(pos) * len(neg))) > 1e-9:
            return False, "trapezoid vs rank statistic mismatch"
    return True, "30 score sets within 1e-9"


def _check_wilcoxon_oracle():
    rng = np.random.default_rng(105)
    for n1 in range(1, 6):
        for n2 in range(1, 6):
            a = rng.integers(0, 5, size=n1).astype(float)
            b = rng.integers(0, 5, size=n2).astype(float)
            pooled = np.concatenate([a, b])
            order = np.argsort(pooled, kind="stable")
            ranks = np.empty(pooled.size)
            i = 0
            while i < pooled.size:
                j = i
                while j + 1 < pooled.size and pooled[order[j + 1]] == pooled[order[i]]:
                    j += 1
                ranks[order[i:j + 1]] = np.mean(np.arange(i, j + 1) + 1.0)
                i = j + 1
            mu = n1 * (pooled.size + 1) / 2.0
            observed = abs(ranks[:n1].sum() - mu)
            hits = total = 0
            for subset in combinations(range(pooled.size), n1):
                total += 1
                if abs(ranks[list(subset)].sum() - mu) >= observed - 1e-9:
                    hits += 1
            if abs(wilcoxon_rank_sum(a, b) - hits / total) > 1e-12:
                return False, f"exact branch mismatch at n1={n1} n2={n2}"
    return True, "all n1,n2 <= 5 match enumeration"


def _toy_windows():
    rng = np.random.default_rng(106)
    windows = []
    for code in (0, 1):
        for i in range(8):
            values = (2.0 * code - 1.0) + 0.2 * rng.normal(size=(5, 8))
            windows.append(CdgdWindow(f"t{code}{i}", i, values, by_code(code)))
    return windows


def _check_training_determinism():
    def run():
        model = McdcModel(
            ModelHyper(temporal_len=8, heads=1, kernel_temporal=3, kernel_channel=3, ffn_hidden=4), seed=11
        )
        windows = _toy_windows()
        train_fold(model, windows, windows, TrainConfig(seed=12, epochs=4, batch_size=8))
        return model.parameter_arrays()

    a, b = run(), run()
    same = all(np.array_equal(a[k], b[k]) for k in a)
    return same, "two runs bit-identical" if same else "parameter drift between runs"


def _check_backward_determinism():
    rng = np.random.default_rng(107)
    x = tensor(rng.normal(size=(4, 4)))
    w = tensor(rng.normal(size=(4, 4)))
    w.requires_grad = True
    with Tape() as tape:
        loss = sum_all(sigmoid(matmul(w, x)))
        backward(tape, loss)
        first = w.grad.copy()
        backward(tape, loss)
        second = w.grad
    same = np.array_equal(first, second)
    return same, "repeat backward identical" if same else "gradient differs between passes"


def _check_forward_finite():
    rng = np.random.default_rng(108)
    model = McdcModel(ModelHyper(temporal_len=8, heads=2, kernel_temporal=3, kernel_channel=4, ffn_hidden=6), seed=13)
    for _ in range(50):
        probs = model.predict_proba(rng.uniform(-50, 50, size=(5, 8)))
        if not np.all(np.isfinite(probs)) or abs(probs.sum() - 1.0) > 1e-9:
            return False, "non-finite or unnormalized output"
    return True, "50 extreme inputs"


def run_checks() -> list[tuple[str, bool, str]]:
    checks = [
        ("conv-naive-oracle", _check_conv_oracle),
        ("matmul-naive-oracle", _check_matmul_oracle),
        ("gradient-finite-differences", _check_gradients),
        ("attention-map-stochastic", _check_attention_stochastic),
        ("auc-rank-equivalence", _check_auc_rank_equivalence),
        ("wilcoxon-exact-enumeration", _check_wilcoxon_oracle),
        ("training-determinism", _check_training_determinism),
        ("backward-determinism", _check_backward_determinism),
        ("forward-finite", _check_forward_finite),
    ]
    results = []
    for name, fn in checks:
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, passed, detail))
    return results
