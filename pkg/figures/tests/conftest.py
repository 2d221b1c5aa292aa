import pytest


@pytest.fixture()
def fixture_dir(tmp_path):
    """Golden CSV fixtures, written fresh per test for isolation."""
    exit_records = tmp_path / "exit_records.csv"
    exit_records.write_text(
        "seed,a,k_init,sigma,t_exit,censored\n"
        "1,2.0,23,0.2,6.0,0\n"
        "2,2.0,23,0.2,9.0,0\n"
        "3,2.0,30,0.2,480.0,1\n"
        "4,2.0,30,0.2,433.0,0\n"
        "5,2.0,38,0.2,28.0,0\n"
        "6,2.0,38,0.2,35.0,0\n"
    )
    exit_multi_a = tmp_path / "exit_multi_a.csv"
    exit_multi_a.write_text(
        "seed,a,k_init,sigma,t_exit,censored\n"
        "1,1.0,20,0.25,12.0,0\n"
        "2,1.0,25,0.25,30.0,0\n"
        "3,1.25,20,0.25,80.0,0\n"
        "4,1.25,25,0.25,95.0,0\n"
        "5,1.5,20,0.25,260.0,0\n"
        "6,1.5,25,0.25,410.0,0\n"
    )
    exit_sigma = tmp_path / "exit_sigma.csv"
    exit_sigma.write_text(
        "seed,a,k_init,sigma,t_exit,censored\n"
        "1,2.0,30,0.2,1250.0,0\n"
        "2,2.0,30,0.25,160.0,0\n"
        "3,2.0,30,0.3,30.0,0\n"
        "4,2.0,30,0.35,8.0,0\n"
    )
    histograms = tmp_path / "histograms.csv"
    rows = ["t,a,sigma,k,frequency"]
    for t in (0.0, 25.0, 50.0):
        rows.append(f"{t},1.5,0.25,19,{0.6 - 0.004 * t}")
        rows.append(f"{t},1.5,0.25,20,{0.3 + 0.002 * t}")
        rows.append(f"{t},1.5,0.25,21,{0.1 + 0.002 * t}")
    histograms.write_text("\n".join(rows) + "\n")
    stationary = tmp_path / "stationary.csv"
    rows = ["t,a,sigma,k,frequency"]
    for a, peak in ((1.5, 20), (2.0, 28), (2.5, 33)):
        for k in range(peak - 2, peak + 3):
            rows.append(f"2500.0,{a},0.25,{k},{0.2}")
    stationary.write_text("\n".join(rows) + "\n")
    spacetime = tmp_path / "spacetime.csv"
    rows = ["t,x,v"]
    for t in (0.0, 4.0, 8.0):
        for i, x in enumerate((-250.0, -125.0, 0.0, 125.0)):
            rows.append(f"{t},{x},{(i + t / 4) % 3}")
    spacetime.write_text("\n".join(rows) + "\n")
    boundary = tmp_path / "boundary.csv"
    boundary.write_text("a,k_low,k_high\n1.0,10,40\n2.0,16,48\n2.5,20,45\n")
    return tmp_path
