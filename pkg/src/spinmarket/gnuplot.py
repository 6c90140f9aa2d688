"""Gnuplot script emission.

Every figure-equivalent output is a CSV plus a generated gnuplot script that
references it, keeping the package free of plotting dependencies.  Scripts
target gnuplot >= 5 (``set datafile separator``, ``skip``).
"""

from __future__ import annotations

from pathlib import Path

_PREAMBLE = """\
# generated by spinmarket; run: gnuplot {name}
set datafile separator ","
set terminal pngcairo size 900,650
"""


def _write(path, text) -> Path:
    path = Path(path)
    path.write_text(text)
    return path


def sweep_script(path, csv_name: str, L_values, collapse: str = "none",
                 L_ref: int = 128) -> Path:
    """sigma(h) per L on log y; optional collapse rescaling of sigma.

    ``collapse``: none | ordered ((L/L_ref)^1.5) | disordered ((L/L_ref)^1).
    """
    exponent = {"none": 0.0, "ordered": 1.5, "disordered": 1.0}[collapse]
    tag = "" if collapse == "none" else f"_{collapse}"
    lines = [_PREAMBLE.format(name=Path(path).name),
             f"set output 'sweep{tag}.png'",
             "set logscale y",
             "set xlabel 'h'",
             ("set ylabel 'sigma'" if collapse == "none" else
              f"set ylabel 'sigma * (L/{L_ref})^{exponent:g}'"),
             "set key top left"]
    plots = []
    for L in L_values:
        scale = (L / L_ref) ** exponent
        plots.append(
            f"'{csv_name}' skip 2 using 2:($1=={L} ? $3*{scale:.10g} : 1/0) "
            f"with linespoints title 'L={L}'")
    lines.append("plot \\\n    " + ", \\\n    ".join(plots))
    return _write(path, "\n".join(lines) + "\n")


def timeseries_script(path, csv_name: str, L: int, m_crit: float = None) -> Path:
    """Three stacked panels: m(t) (with +-m_crit guides), dm(t), lb(t) vs 2L."""
    lines = [_PREAMBLE.format(name=Path(path).name),
             "set output 'timeseries.png'",
             "set multiplot layout 3,1",
             "set xlabel ''"]
    if m_crit is not None:
        lines += [f"mcrit = {m_crit:.6g}"]
        guides = ", mcrit lw 1 dt 2 title 'm_{crit}', -mcrit lw 1 dt 2 notitle"
    else:
        guides = ""
    lines += [
        "set ylabel 'm'",
        f"plot '{csv_name}' skip 2 using 1:2 with lines title 'm'{guides}",
        "set ylabel 'dm'",
        f"plot '{csv_name}' skip 2 using 1:3 with lines title 'dm'",
        "set ylabel 'l_b'",
        "set xlabel 't'",
        f"plot '{csv_name}' skip 2 using 1:4 with lines title 'l_b', {2 * L} lw 1 dt 2 title '2L'",
        "unset multiplot",
    ]
    return _write(path, "\n".join(lines) + "\n")


def compare_script(path, series_csv: str, compare_csv: str, L: int,
                   m_crit: float) -> Path:
    """Four stacked panels: m with +-m_crit, dm, lb with 2L, and the two
    volatility tracks (rolling micro vs surface prediction)."""
    lines = [
        _PREAMBLE.format(name=Path(path).name),
        "set output 'compare.png'",
        "set multiplot layout 4,1",
        f"mcrit = {m_crit:.6g}",
        "set ylabel 'm'",
        f"plot '{series_csv}' skip 2 using 1:2 with lines title 'm', "
        "mcrit lw 1 dt 2 title 'm_{crit}', -mcrit lw 1 dt 2 notitle",
        "set ylabel 'dm'",
        f"plot '{series_csv}' skip 2 using 1:3 with lines title 'dm'",
        "set ylabel 'l_b'",
        f"plot '{series_csv}' skip 2 using 1:4 with lines title 'l_b', "
        f"{2 * L} lw 1 dt 2 title '2L (minimal border for m ~ 0)'",
        "set ylabel 'volatility'",
        "set xlabel 't'",
        "set logscale y",
        f"plot '{compare_csv}' skip 2 using 1:2 with lines title 'rolling sigma (micro)', "
        f"'{compare_csv}' skip 2 using 1:3 with lines title 'sigma(L, h_bar) (macro)'",
        "unset multiplot",
    ]
    return _write(path, "\n".join(lines) + "\n")


def density_script(path, density_csv: str, mixture_csv: str = None,
                   powerlaw: tuple = None, gaussian_sigma: float = None) -> Path:
    """Log-log absolute-return density, optionally with the field-mixture
    density, a power-law guide (amplitude, exponent), or a Gaussian guide."""
    lines = [_PREAMBLE.format(name=Path(path).name),
             "set output 'density.png'",
             "set logscale xy",
             "set xlabel '|dm|'",
             "set ylabel 'density'"]
    plots = [f"'{density_csv}' skip 2 using (sqrt($1*$2)):3 with points pt 2 "
             "title 'empirical'"]
    if mixture_csv:
        plots.append(f"'{mixture_csv}' skip 2 using 1:2 with lines "
                     "title 'field-mixture'")
    if powerlaw:
        amp, expo = powerlaw
        plots.append(f"{amp:.6g}*x**({expo:.4g}) lw 1 dt 2 "
                     f"title 'x^{{{expo:.3g}}}'")
    if gaussian_sigma:
        s = gaussian_sigma
        plots.append(f"sqrt(2/pi)/{s:.6g}*exp(-x*x/(2*{s:.6g}**2)) lw 1 dt 3 "
                     f"title 'Gaussian sigma={s:g}'")
    lines.append("plot \\\n    " + ", \\\n    ".join(plots))
    return _write(path, "\n".join(lines) + "\n")


def rtz_script(path, hist_csv: str) -> Path:
    """Log-log return-to-zero duration density."""
    lines = [_PREAMBLE.format(name=Path(path).name),
             "set output 'rtz.png'",
             "set logscale xy",
             "set xlabel 'duration'",
             "set ylabel 'density'",
             f"plot '{hist_csv}' skip 2 using (sqrt($1*$2)):3 with points pt 2 "
             "title 'return-to-zero durations'"]
    return _write(path, "\n".join(lines) + "\n")
