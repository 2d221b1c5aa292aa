import pytest

from busselab_figures.cli import main
from busselab_figures.render import FigureSpec, SchemaError, render

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

KIND_INPUT = {
    "spacetime": "spacetime.csv",
    "exit-map": "exit_records.csv",
    "exit-bars": "exit_records.csv",
    "stationary-map": "stationary.csv",
    "density-time": "histograms.csv",
    "exit-vs-a": "exit_multi_a.csv",
    "exit-vs-sigma": "exit_sigma.csv",
}


@pytest.mark.parametrize("kind", sorted(KIND_INPUT))
def test_each_kind_renders_byte_identical(kind, fixture_dir):
    source = fixture_dir / KIND_INPUT[kind]
    out1 = fixture_dir / f"{kind}_1.png"
    out2 = fixture_dir / f"{kind}_2.png"
    for out in (out1, out2):
        render(FigureSpec(kind=kind, inputs=(str(source),), out=str(out)))
    data1, data2 = out1.read_bytes(), out2.read_bytes()
    assert data1.startswith(PNG_MAGIC)
    assert len(data1) > 1000
    assert data1 == data2


@pytest.mark.parametrize("kind", ["exit-map", "exit-bars", "stationary-map"])
def test_boundary_overlay(kind, fixture_dir):
    source = fixture_dir / KIND_INPUT[kind]
    plain = fixture_dir / "plain.png"
    overlay = fixture_dir / "overlay.png"
    render(FigureSpec(kind=kind, inputs=(str(source),), out=str(plain)))
    render(FigureSpec(kind=kind, inputs=(str(source),), out=str(overlay),
                      boundary=str(fixture_dir / "boundary.csv")))
    assert plain.read_bytes() != overlay.read_bytes()


def test_schema_mismatch_lists_columns(fixture_dir):
    bad = fixture_dir / "bad.csv"
    bad.write_text("seed,a,k_init\n1,2.0,30\n")
    with pytest.raises(SchemaError) as err:
        render(FigureSpec(kind="exit-map", inputs=(str(bad),), out=str(fixture_dir / "x.png")))
    assert set(err.value.missing) == {"sigma", "t_exit", "censored"}


def test_unknown_kind_rejected(fixture_dir):
    with pytest.raises(ValueError, match="unknown figure kind"):
        FigureSpec(kind="pie", inputs=("x.csv",), out="y.png")


def test_axis_ranges_applied(fixture_dir):
    source = fixture_dir / "exit_records.csv"
    default = fixture_dir / "default.png"
    ranged = fixture_dir / "ranged.png"
    render(FigureSpec(kind="exit-bars", inputs=(str(source),), out=str(default)))
    render(FigureSpec(kind="exit-bars", inputs=(str(source),), out=str(ranged), ylim=(0, 600)))
    assert default.read_bytes() != ranged.read_bytes()


class TestCli:
    def test_success_prints_path(self, fixture_dir, capsys):
        out = fixture_dir / "cli.png"
        status = main(["density-time", "--in", str(fixture_dir / "histograms.csv"), "--out", str(out)])
        assert status == 0
        assert str(out) in capsys.readouterr().out
        assert out.read_bytes().startswith(PNG_MAGIC)

    def test_schema_mismatch_exits_2(self, fixture_dir, capsys):
        bad = fixture_dir / "bad.csv"
        bad.write_text("t,a\n0,1\n")
        status = main(["density-time", "--in", str(bad), "--out", str(fixture_dir / "no.png")])
        assert status == 2
        err = capsys.readouterr().err
        assert "sigma" in err and "frequency" in err and "k" in err

    def test_missing_file_exits_1(self, fixture_dir, capsys):
        status = main(["spacetime", "--in", str(fixture_dir / "ghost.csv"),
                       "--out", str(fixture_dir / "no.png")])
        assert status == 1

    def test_multiple_inputs_concatenated(self, fixture_dir):
        # sigma sweep split across two record files
        first = fixture_dir / "s1.csv"
        second = fixture_dir / "s2.csv"
        text = (fixture_dir / "exit_sigma.csv").read_text().splitlines()
        first.write_text("\n".join(text[:3]) + "\n")
        second.write_text(text[0] + "\n" + "\n".join(text[3:]) + "\n")
        out = fixture_dir / "multi.png"
        status = main(["exit-vs-sigma", "--in", str(first), "--in", str(second), "--out", str(out)])
        assert status == 0
