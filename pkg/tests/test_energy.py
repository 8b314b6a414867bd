import pytest

from lrthr.energy import DeadNodeError, EnergyCosts, EnergyLedger


def ledger(**kw):
    return EnergyLedger(EnergyCosts(**kw), [0, 1, 2], exempt=frozenset({2}))


def test_one_transmission():
    e = ledger()
    assert e.charge(0, "tx") == pytest.approx(0.0255)
    assert e.residual[0] == pytest.approx(1.9745)
    assert e.energy_ratio(0) == pytest.approx(0.98725)


def test_seventy_eight_transmissions_then_broke():
    # 2.0 / 0.0255 = 78.43
    e = ledger()
    n = 0
    while e.can_afford(0, "tx"):
        e.charge(0, "tx")
        n += 1
    assert n == 78
    assert e.residual[0] == pytest.approx(2.0 - 78 * 0.0255)
    e.retire(0)
    assert not e.alive(0) and e.energy_ratio(0) == 0.0
    with pytest.raises(DeadNodeError):
        e.charge(0, "rx")


def test_partial_charge_drains_to_zero():
    e = ledger(initial=0.03)
    e.charge(0, "tx")
    assert e.charge(0, "rx") == pytest.approx(0.0045)
    assert e.residual[0] == 0.0 and not e.alive(0)
    assert e.consumed(0) == pytest.approx(0.03)


def test_idle_sleep_and_settle():
    e = ledger()
    assert e.charge_time(0, "idle", 1.0) == pytest.approx(0.0096)
    assert e.charge_time(1, "sleep", 10.0) == pytest.approx(0.00005)
    assert e.settle(0, 5.0) == pytest.approx(0.048)
    assert e.settle(0, 5.0) == 0.0
    assert e.settle(0, 7.5) == pytest.approx(0.024)
    assert e.totals[0]["idle"] == pytest.approx(0.0096 + 0.072)


def test_short_frames_charged_pro_rata():
    e = ledger()
    assert e.charge(1, "rx", 14 / 150) == pytest.approx(0.021 * 14 / 150)


def test_exempt_sink_never_charged():
    e = ledger()
    assert e.charge(2, "tx", 1000) == 0.0
    assert e.settle(2, 1e6) == 0.0
    assert e.alive(2) and e.energy_ratio(2) == 1.0 and e.can_afford(2, "tx", 1e9)
    e.retire(2)
    assert e.alive(2)


def test_total_is_sum_of_causes():
    e = ledger()
    e.charge(0, "tx", 3)
    e.charge(1, "rx", 2)
    e.charge_time(1, "idle", 4)
    assert e.total_consumed() == pytest.approx(3 * 0.0255 + 2 * 0.021 + 4 * 0.0096)
    assert e.total_consumed() == pytest.approx(sum(e.initial[n] - e.residual[n] for n in (0, 1)))


@pytest.mark.parametrize("call", [
    lambda e: e.charge(0, "idle"),
    lambda e: e.charge(0, "tx", -1),
    lambda e: e.charge_time(0, "tx", 1.0),
    lambda e: e.charge_time(0, "idle", -1.0),
])
def test_bad_charges(call):
    with pytest.raises(ValueError):
        call(ledger())
