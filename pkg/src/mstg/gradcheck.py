"""Central finite-difference verification of tape gradients."""

from dataclasses import dataclass

from .tensor import NonFiniteError, Tape


@dataclass
class ParamCheck:
    name: str
    max_rel_err: float
    worst_index: int
    entries: int


@dataclass
class GradCheckReport:
    checks: list
    tol: float
    step: float

    @property
    def worst(self):
        return max((c.max_rel_err for c in self.checks), default=0.0)

    @property
    def passed(self):
        return self.worst < self.tol

    def summary(self):
        lines = []
        for c in self.checks:
            status = "ok" if c.max_rel_err < self.tol else "FAIL"
            lines.append(
                f"  {status:4s} {c.name}: max rel err {c.max_rel_err:.3e} "
                f"over {c.entries} entries"
            )
        return "\n".join(lines)


def grad_check(f, params, step=1e-5, tol=1e-4):
    """Compare tape gradients of the scalar ``f()`` against central differences.

    ``params`` is a dict of name -> Tensor (or a list of tensors); every entry
    of every parameter is perturbed by ``+-step`` and the relative error
    ``|analytic - fd| / max(1, |fd|)`` is recorded. The check passes when all
    errors stay below ``tol``.
    """
    if isinstance(params, dict):
        items = list(params.items())
    else:
        items = [(p.name or f"param{i}", p) for i, p in enumerate(params)]

    with Tape() as tape:
        loss = f()
    if loss.size != 1:
        raise ValueError("grad_check requires a scalar-valued computation")
    analytic = tape.gradients(loss, [p for _, p in items])

    checks = []
    for (name, p), grad in zip(items, analytic):
        flat = p.data.reshape(-1)
        aflat = grad.reshape(-1)
        worst = 0.0
        worst_index = 0
        for i in range(flat.size):
            saved = flat[i]
            try:
                flat[i] = saved + step
                f_plus = f().data.item()
                flat[i] = saved - step
                f_minus = f().data.item()
            except NonFiniteError as e:
                raise NonFiniteError(
                    f"gradient check aborted at {name}[{i}]: {e}"
                ) from e
            finally:
                flat[i] = saved
            fd = (f_plus - f_minus) / (2.0 * step)
            err = abs(aflat[i] - fd) / max(1.0, abs(fd))
            if err > worst:
                worst = err
                worst_index = i
        checks.append(ParamCheck(name, worst, worst_index, flat.size))

    return GradCheckReport(checks, tol=tol, step=step)
