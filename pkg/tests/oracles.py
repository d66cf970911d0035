"""Independent reference computations shared by the unit and acceptance tests."""
import numpy as np

from hsusynth.network import Encoded, Net
from hsusynth.units import Dims, HsuParameters

SMALL = Dims(n_types=3, n_tokens=5, k=2, d_max=2, d_h=4)


def random_instance(rng: np.random.Generator, dims: Dims = SMALL, batch: int = 1):
    """Random parameters plus a random padded sub-tree batch over ``dims``."""
    params = HsuParameters.init(dims, seed=int(rng.integers(2**31)), scale=0.5)
    for name in params.arrays:
        if name.startswith("b_"):
            params.arrays[name] = rng.uniform(-0.5, 0.5, params.arrays[name].shape)

    def node():
        return [int(rng.integers(1, dims.n_types))] + [int(rng.integers(dims.n_tokens)) for _ in range(dims.k)]

    parent = np.array([node() for _ in range(batch)])
    children = np.zeros((batch, dims.d_max, 1 + dims.k), dtype=np.int64)
    mask = np.zeros((batch, dims.d_max))
    for b in range(batch):
        n = int(rng.integers(1, dims.d_max + 1))
        for i in range(n):
            children[b, i] = node()
            mask[b, i] = 1
    return params, Encoded(parent, children, mask, [f"r{b}" for b in range(batch)])


def joint_value(params: HsuParameters, enc: Encoded, alpha=1.0, beta=1.0) -> float:
    return float(Net(params).joint(enc, alpha, beta).value)


def central_differences(params: HsuParameters, enc: Encoded, eps: float = 1e-5, alpha=1.0, beta=1.0):
    """Gradient of the joint loss by central differences, entry by entry."""
    out = {}
    for name, arr in params.arrays.items():
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = joint_value(params, enc, alpha, beta)
            flat[i] = keep - eps
            down = joint_value(params, enc, alpha, beta)
            flat[i] = keep
            gflat[i] = (up - down) / (2 * eps)
        out[name] = g
    return out


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


def confusion_scores(pred, true):
    """Micro/macro/weighted P, R, F1 from an explicit confusion matrix."""
    labels = sorted(set(pred) | set(true))
    idx = {l: i for i, l in enumerate(labels)}
    m = np.zeros((len(labels), len(labels)))
    for p, t in zip(pred, true):
        m[idx[t], idx[p]] += 1
    tp = np.diag(m)
    pred_count = m.sum(axis=0)
    true_count = m.sum(axis=1)
    prec = np.divide(tp, pred_count, out=np.zeros_like(tp), where=pred_count > 0)
    rec = np.divide(tp, true_count, out=np.zeros_like(tp), where=true_count > 0)
    f1 = np.divide(2 * prec * rec, prec + rec, out=np.zeros_like(tp), where=(prec + rec) > 0)
    # macro and weighted averages run over labels present in the truth or the prediction
    support = true_count
    out = {
        "accuracy": tp.sum() / len(true),
        "micro_precision": tp.sum() / pred_count.sum(),
        "micro_recall": tp.sum() / true_count.sum(),
    }
    mp, mr = out["micro_precision"], out["micro_recall"]
    out["micro_f1"] = 2 * mp * mr / (mp + mr) if mp + mr else 0.0
    out["macro_precision"], out["macro_recall"], out["macro_f1"] = prec.mean(), rec.mean(), f1.mean()
    w = support / support.sum()
    out["weighted_precision"], out["weighted_recall"], out["weighted_f1"] = (w @ prec, w @ rec, w @ f1)
    return {k: float(v) for k, v in out.items()}
