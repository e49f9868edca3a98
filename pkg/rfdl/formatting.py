import typing as t

from click import style


def format_columns(data: t.Any, prefix=""):
    if isinstance(data, t.Dict):
        return _format_columns_dict(data, prefix)

    raise NotImplementedError(format_columns, data, type(data))


def _format_columns_dict(dict, prefix):
    if not dict:
        return ""
    c1_width = max(len(str(k)) for k in dict.keys())
    return "\n".join(
        "{}{:<{c1_width}}\t{}".format(prefix, str(k), v, c1_width=c1_width)
        for k, v in dict.items()
    ).strip("\n")


def format_percent(value: float, precision: int = 2) -> str:
    return "{:.{p}f}".format(100 * value, p=precision)


def format_mean_std(mean: float, std: float, precision: int = 2) -> str:
    """Format an accuracy aggregate as a percentage, e.g. `94.05±1.12`."""
    return "{}±{}".format(
        format_percent(mean, precision), format_percent(std, precision)
    )


def format_stop(converged: bool, iterations: int, residual: float) -> str:
    if converged:
        return style(f"converged in {iterations} iterations", fg="green")
    return style(
        f"stopped after {iterations} iterations (residual {residual:.3g})",
        fg="yellow",
    )
