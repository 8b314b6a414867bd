import math
import random

import pytest

from lrthr.metrics import (
    CURVE_COLUMNS,
    DROP_REASONS,
    PACKET_COLUMNS,
    CurveRow,
    EnergyRow,
    PacketRecord,
    RunLedger,
    aggregate,
    coefficient_of_variation,
    finalize,
    read_curve,
    write_curve,
    write_packets,
)


def run(delays, lost=0, energy=1.0, reason="deadline"):
    pk = [PacketRecord(i, 0, float(i), True, d, 3) for i, d in enumerate(delays)]
    pk += [PacketRecord(len(delays) + i, 0, 0.0, drop_reason=reason) for i in range(lost)]
    return finalize(RunLedger(pk, [], energy))


def test_finalize_hand_example():
    m = run([0.1, 0.3, 0.2], lost=1, energy=1.5)
    assert (m.generated, m.delivered_on_time, m.missed) == (4, 3, 1)
    assert m.dmr == 0.25
    assert m.ecpp == pytest.approx(0.5)
    assert m.delay_avg == pytest.approx(0.2)
    assert m.delay_worst == 0.3
    assert m.drops_by_reason == {**dict.fromkeys(DROP_REASONS, 0), "deadline": 1}


def test_no_packets_leaves_metrics_undefined():
    m = run([])
    assert m.dmr is None and not m.dmr_defined
    assert m.ecpp is None and m.delay_avg is None and m.delay_worst is None


def test_nothing_delivered():
    m = run([], lost=5, reason="retries")
    assert m.dmr == 1.0 and m.ecpp is None and not m.ecpp_defined
    assert m.drops_by_reason["retries"] == 5


def test_aggregate_against_hand_computation():
    runs = [(0.2, run([0.1], lost=1, energy=2.0)),
            (0.2, run([0.1, 0.1], energy=1.0)),
            (0.3, run([0.1], energy=3.0))]
    rows = {(r.param, r.metric): r for r in aggregate(runs)}
    dmr = rows[0.2, "dmr"]
    assert dmr.mean == 0.25 and dmr.n_seeds == 2
    # values 0.5 and 0.0: sample sd = sqrt(2 * 0.25^2 / 1)
    assert dmr.sd == pytest.approx(math.sqrt(0.125))
    assert rows[0.2, "ecpp"].mean == pytest.approx(1.25)
    assert rows[0.3, "ecpp"] == CurveRow(0.3, "ecpp", 3.0, 0.0, 1)


def test_aggregate_skips_undefined_and_reports_empty():
    runs = [(1.0, run([], lost=2)), (1.0, run([0.2]))]
    rows = {(r.param, r.metric): r for r in aggregate(runs)}
    assert rows[1.0, "ecpp"].n_seeds == 1
    rows = {(r.param, r.metric): r for r in aggregate([(1.0, run([], lost=1))])}
    assert rows[1.0, "ecpp"].n_seeds == 0 and math.isnan(rows[1.0, "ecpp"].mean)


def test_aggregate_is_order_independent():
    rng = random.Random(4)
    runs = [(rng.choice([0.1, 0.2]), run([rng.random() for _ in range(rng.randint(1, 5))],
                                         lost=rng.randint(0, 3), energy=rng.random() * 10))
            for _ in range(40)]
    ref = aggregate(runs)
    for _ in range(5):
        rng.shuffle(runs)
        assert aggregate(runs) == ref


def test_aggregate_rejects_empty():
    with pytest.raises(ValueError):
        aggregate([])


def test_cv():
    assert coefficient_of_variation([1.0, 1.0, 1.0]) == 0.0
    assert coefficient_of_variation([1.0, 3.0]) == pytest.approx(0.5)
    assert coefficient_of_variation([0.0, 0.0]) == 0.0


def test_csv_round_trip(tmp_path):
    rows = aggregate([(0.35, run([0.1, 0.2], lost=1))])
    write_curve(tmp_path / "c.csv", rows)
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == ",".join(CURVE_COLUMNS)
    back = read_curve(tmp_path / "c.csv")
    assert [(r.param, r.metric, r.n_seeds) for r in back] == [(r.param, r.metric, r.n_seeds) for r in rows]
    assert back[0].mean == rows[0].mean


def test_packet_csv(tmp_path):
    write_packets(tmp_path / "p.csv", [PacketRecord(0, 3, 1.5, True, 0.25, 4),
                                       PacketRecord(1, 3, 2.0, drop_reason="energy")])
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines == [",".join(PACKET_COLUMNS), "0,3,1.5,1,0.25,4,", "1,3,2.0,0,,0,energy"]


def test_energy_row():
    r = EnergyRow(1, 0.0, 0.0, 2.0, 1.5, 0.2, 0.2, 0.1, 0.0)
    assert r.consumed == pytest.approx(0.5)
