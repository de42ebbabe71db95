from __future__ import annotations

import math

import numpy as np
import pytest
import yaml

from fracldg.cli import EXIT_INVALID, EXIT_OK, EXIT_PARTIAL, main
from fracldg.errors import InvalidArgument, InvalidData, NonlinearDivergence
from fracldg.harness import (
    CSV_COLUMNS,
    ErrorRow,
    ErrorTable,
    RunSpec,
    emit_table,
    estimate_order,
    make_spec,
    parse_value,
    parse_values,
    read_csv,
    run_sweep,
)


class TestEstimateOrder:
    def test_table1_pair(self):
        o = estimate_order([8.6e-3, 3.4e-3], [10, 15])
        assert o[0] is None and o[1] == pytest.approx(2.29, abs=0.005)

    def test_exact_halving(self):
        assert estimate_order([1.0, 0.5, 0.25], [10, 20, 40])[1:] == [pytest.approx(1.0)] * 2

    def test_table3_pair(self):
        T = 0.5
        o = estimate_order([4.38e-3, 2.21e-3], [1 / (T / 100), 1 / (T / 200)])
        assert o[1] == pytest.approx(0.99, abs=0.005)

    def test_single(self):
        assert estimate_order([1e-3], [5]) == [None]

    @pytest.mark.parametrize("errs,res", [([1e-3, 0.0], [1, 2]), ([-1.0, 1.0], [1, 2]),
                                          ([1.0, 2.0], [1, 1]), ([1.0, 2.0, 3.0], [1, 3, 2]),
                                          ([1.0, math.nan], [1, 2]), ([1.0], [1, 2])])
    def test_invalid(self, errs, res):
        with pytest.raises(InvalidData):
            estimate_order(errs, res)


class TestParsing:
    @pytest.mark.parametrize("tok,want", [("10", 10.0), ("1/40", 0.025), ("T/200", 0.0025), ("2.5e-3", 2.5e-3),
                                          ("T", 0.5), (7, 7.0)])
    def test_value(self, tok, want):
        assert parse_value(tok, 0.5) == pytest.approx(want)

    def test_values(self):
        assert parse_values("1/10, 1/20,1/40") == pytest.approx((0.1, 0.05, 0.025))

    @pytest.mark.parametrize("tok", ["", "abc", "1/0", "T/x"])
    def test_bad(self, tok):
        with pytest.raises(InvalidArgument):
            parse_value(tok)


class TestRunSpec:
    def test_defaults(self):
        s = make_spec(dict(case="ex1_diffusion", beta=1.2, N=1, sweep="K", values="5,10"))
        assert s.case == "ex1" and s.fixed_dt == pytest.approx(0.001) and s.forcing == "discrete"

    @pytest.mark.parametrize("bad", [
        dict(case="ex9"), dict(beta=2.2), dict(N=-1), dict(sweep="h"), dict(values=()),
        dict(values=(10.5,)), dict(sweep="dt", values=(0.3,)), dict(weight="cosine"),
        dict(forcing="exactish"), dict(flux="up"), dict(field="u1"), dict(S=0), dict(values=(-5.0,)),
    ])
    def test_invalid(self, bad):
        base = dict(case="ex1", beta=1.2, N=1, sweep="K", values=(5.0, 10.0))
        with pytest.raises(InvalidArgument):
            RunSpec(**(base | bad))

    def test_unknown_key(self):
        with pytest.raises(InvalidArgument):
            make_spec(dict(case="ex1", beta=1.2, N=1, sweep="K", values="5", colour="red"))

    def test_missing_key(self):
        with pytest.raises(InvalidArgument):
            make_spec(dict(case="ex1", beta=1.2, sweep="K", values="5"))


def _quick(**kw):
    base = dict(case="ex1", beta=1.2, N=2, sweep="K", values="5,10,15,20", dt="T/50")
    return make_spec(base | kw)


class TestRunSweep:
    def test_ex1_order_near_three(self):
        t = run_sweep(_quick())
        assert [r.value for r in t.rows] == [5, 10, 15, 20]
        assert t.orders[0] is None
        assert 2.7 <= t.orders[-1] <= 3.3

    def test_single_row(self):
        t = run_sweep(_quick(values="10"))
        assert len(t.rows) == 1 and t.rows[0].order is None

    def test_theta_sweep_ex3(self):
        t = run_sweep(make_spec(dict(case="ex3", beta=1.2, N=3, K=20, sweep="theta",
                                     values="1/10,1/20,1/40", dt="T/50")))
        assert [r.theta for r in t.rows] == pytest.approx([0.1, 0.05, 0.025])
        for o in t.orders[1:]:
            assert 1.7 <= o <= 2.3

    def test_dt_sweep_metadata(self):
        t = run_sweep(make_spec(dict(case="ex1", beta=1.5, N=1, K=5, sweep="dt", values="T/10,T/20",
                                     forcing="analytic")))
        assert [r.dt for r in t.rows] == pytest.approx([0.05, 0.025])

    def test_deterministic_and_parallel(self):
        a = run_sweep(_quick(values="5,10,15"))
        b = run_sweep(_quick(values="5,10,15"))
        c = run_sweep(_quick(values="5,10,15", jobs=3))
        assert a.without_timing() == b.without_timing() == c.without_timing()
        strip = lambda text: [line.rsplit(",", 1)[0] for line in text.splitlines()]  # noqa: E731
        assert strip(emit_table(a)) == strip(emit_table(c))

    def test_field_selection(self):
        both = run_sweep(make_spec(dict(case="ex4", beta=1.3, N=1, sweep="K", values="10", dt="T/20")))
        u1 = run_sweep(make_spec(dict(case="ex4", beta=1.3, N=1, sweep="K", values="10", dt="T/20", field="u1")))
        u2 = run_sweep(make_spec(dict(case="ex4", beta=1.3, N=1, sweep="K", values="10", dt="T/20", field="u2")))
        assert u1.case == "ex4:u1"
        assert both.errors[0] == pytest.approx(math.hypot(u1.errors[0], u2.errors[0]), rel=1e-12)

    def test_failed_rows_are_dropped(self, monkeypatch):
        import fracldg.harness as h

        real = h.run_point

        def flaky(spec, value):
            if value == 10:
                raise NonlinearDivergence("forced", 1.0, 3)
            return real(spec, value)

        monkeypatch.setattr(h, "run_point", flaky)
        t = run_sweep(_quick(values="5,10,20"))
        assert [r.value for r in t.rows] == [5, 20]
        assert t.failures[0][0] == 10 and "n=3" in t.failures[0][1]
        assert t.orders[1] == pytest.approx(math.log(t.errors[0] / t.errors[1]) / math.log(4))


class TestEmit:
    def test_header_only(self):
        t = ErrorTable("K", "ex1", 1.2, 1, 0.5)
        assert emit_table(t) == ",".join(CSV_COLUMNS) + "\n"
        assert read_csv(emit_table(t)) is None

    def test_table1_row(self):
        t = ErrorTable("K", "ex1", 1.2, 1, 0.5, (ErrorRow(10.0, 8.6e-3, 2.8, 0.001, 0.02, 1.0),))
        line = emit_table(t).splitlines()[1]
        assert line.startswith("K,10,0.0086,2.8,ex1,1.2,1,")

    def test_round_trip(self, tmp_path):
        t = run_sweep(_quick(values="5,10"))
        path = tmp_path / "t.csv"
        emit_table(t, "csv", path)
        back = read_csv(path)
        assert back.without_timing() == t.without_timing()
        assert [r.walltime_s for r in back.rows] == pytest.approx([r.walltime_s for r in t.rows], abs=1e-3)

    def test_markdown(self):
        t = ErrorTable("dt", "ex2", 1.2, 1, 0.5, (ErrorRow(0.005, 4.38e-3, None, 0.005, 0.02),
                                                 ErrorRow(0.0025, 2.21e-3, 0.99, 0.0025, 0.02)))
        md = emit_table(t, "md")
        assert "| T/100 | 4.38e-03 | - |" in md and "| T/200 | 2.21e-03 | 0.99 |" in md

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            emit_table(ErrorTable("K", "ex1", 1.2, 1, 0.5), "csv", tmp_path / "missing" / "x.csv")

    def test_bad_format(self):
        with pytest.raises(InvalidArgument):
            emit_table(ErrorTable("K", "ex1", 1.2, 1, 0.5), "xlsx")


class TestCLI:
    def test_run_csv(self, tmp_path, capsys):
        out = tmp_path / "t.csv"
        code = main(["run", "--case", "ex1", "--beta", "1.2", "--N", "1", "--sweep", "K",
                     "--values", "5,10", "--dt", "T/20", "--out", str(out)])
        assert code == EXIT_OK
        t = read_csv(out)
        assert len(t.rows) == 2 and t.rows[1].order > 1.5

    def test_run_md_stdout(self, capsys):
        code = main(["run", "--case", "ex2", "--beta", "1.4", "--N", "1", "--sweep", "K",
                     "--values", "5", "--dt", "T/10", "--format", "md"])
        assert code == EXIT_OK
        assert "| K | L²-Error | order |" in capsys.readouterr().out

    def test_config_and_override(self, tmp_path, capsys):
        cfg = tmp_path / "sweep.yaml"
        cfg.write_text(yaml.safe_dump(dict(case="ex1", beta=1.2, N=1, sweep="K", values="5,10",
                                           dt="T/20", format="md")))
        code = main(["run", "--config", str(cfg), "--values", "5"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "| 5 |" in out and "| 10 |" not in out

    @pytest.mark.parametrize("argv", [
        ["run", "--case", "ex9", "--beta", "1.2", "--N", "1", "--sweep", "K", "--values", "5"],
        ["run", "--case", "ex1", "--beta", "1.2", "--N", "1", "--sweep", "K"],
        ["run", "--config", "/nonexistent/file.yaml"],
    ])
    def test_invalid(self, argv, capsys):
        assert main(argv) == EXIT_INVALID
        assert "invalid" in capsys.readouterr().err

    def test_partial(self, monkeypatch, capsys):
        import fracldg.harness as h

        real = h.run_point

        def flaky(spec, value):
            if value == 10:
                raise NonlinearDivergence("forced", 1.0, 2)
            return real(spec, value)

        monkeypatch.setattr(h, "run_point", flaky)
        code = main(["run", "--case", "ex1", "--beta", "1.2", "--N", "1", "--sweep", "K",
                     "--values", "5,10", "--dt", "T/10"])
        captured = capsys.readouterr()
        assert code == EXIT_PARTIAL
        assert captured.out.count("\n") == 2 and "failed" in captured.err
