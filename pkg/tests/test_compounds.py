import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xbarsim.compounds import (TransferCompound, TransferConfig, UnitCellConfig, UnitCellTile,
                               make_tile)
from xbarsim.devices import DeviceParams, preset
from xbarsim.errors import ConfigError
from xbarsim.periphery import PERFECT_IO, IOParams
from xbarsim.pulsed import UpdateParams
from xbarsim.rng import stream
from xbarsim.tile import AnalogTile, TileConfig

CONST = DeviceParams(kind="constant_step", dw_min=1e-3)
EXACT = UpdateParams(pulse_type="deterministic_implicit")


def cfg(device, forward=PERFECT_IO, update=UpdateParams()):
    return TileConfig(forward=forward, backward=forward, update=update, device=device)


# unit cells ---------------------------------------------------------------

def test_single_device_cell_is_plain_tile():
    dev = preset("reram_sb")
    plain = AnalogTile(3, 4, cfg(dev, IOParams()), stream(0, "t"))
    cell = UnitCellTile(3, 4, cfg(UnitCellConfig((dev,)), IOParams()), stream(0, "t"))
    rng = stream(1, "u")
    for _ in range(30):
        x, d = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 3)
        plain.update(x, d, 0.1)
        cell.update(x, d, 0.1)
        np.testing.assert_array_equal(plain.forward(x), cell.forward(x))
    np.testing.assert_array_equal(plain.get_weights(), cell.get_weights())


def test_pair_with_reference_doubles_step():
    single = AnalogTile(2, 2, cfg(CONST, update=EXACT), stream(0, "t"))
    pair = UnitCellTile(2, 2, cfg(UnitCellConfig((CONST, CONST), weights=(1.0, -1.0)), update=EXACT),
                        stream(0, "t"))
    x, d = np.array([1.0, 0.5]), np.array([0.5, -1.0])
    single.update(x, d, 0.01)
    pair.update(x, d, 0.01)
    np.testing.assert_allclose(pair.get_weights(), 2 * single.get_weights(), atol=1e-15)
    # the members move in opposite directions
    np.testing.assert_allclose(pair.tiles[0].weights, -pair.tiles[1].weights, atol=1e-15)


def test_round_robin_counts():
    cell = UnitCellTile(2, 2, cfg(UnitCellConfig((CONST, CONST), update_policy="one_by_one_round_robin")),
                        stream(0, "t"))
    for _ in range(2 * 7):
        cell.update(np.ones(2), np.ones(2), 0.01)
    assert cell.update_counts == [7, 7]


def test_all_together_counts():
    cell = UnitCellTile(2, 2, cfg(UnitCellConfig((CONST, CONST, CONST))), stream(0, "t"))
    for _ in range(5):
        cell.update(np.ones(2), np.ones(2), 0.01)
    assert cell.update_counts == [5, 5, 5]


@settings(max_examples=20, deadline=None)
@given(g=st.lists(st.floats(-2, 2).filter(lambda v: abs(v) > 0.05), min_size=1, max_size=3),
       seed=st.integers(0, 1000))
def test_unit_cell_bounded(g, seed):
    devs = tuple(preset("reram_sb", dw_min=0.05) for _ in g)
    cell = UnitCellTile(3, 3, cfg(UnitCellConfig(devs, weights=tuple(g))), stream(seed, "t"))
    rng = stream(seed, "u")
    lo, hi = cell.bounds()
    for _ in range(40):
        cell.update(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3), 1.0)
        w = cell.get_weights()
        assert np.all(w <= hi + 1e-12) and np.all(w >= lo - 1e-12)


def test_unit_cell_set_weights():
    cell = UnitCellTile(2, 2, cfg(UnitCellConfig((CONST, CONST), weights=(0.5, -1.0))), stream(0, "t"))
    w = np.array([[0.2, -0.1], [0.0, 0.3]])
    cell.set_weights(w)
    np.testing.assert_allclose(cell.get_weights(), w)
    np.testing.assert_array_equal(cell.tiles[1].weights, 0.0)


def test_unit_cell_validation():
    with pytest.raises(ConfigError, match="unit_cell_devices"):
        UnitCellConfig(())
    with pytest.raises(ConfigError, match="weights"):
        UnitCellConfig((CONST,), weights=(1.0, 2.0))
    with pytest.raises(ConfigError, match="weights"):
        UnitCellConfig((CONST,), weights=(float("inf"),))
    with pytest.raises(ConfigError, match="update_policy"):
        UnitCellConfig((CONST,), update_policy="sometimes")


# transfer compound ----------------------------------------------------------

def compound(transfer_every=1, gamma=0.0, transfer_lr=1.0, forward=PERFECT_IO, update=UpdateParams(),
             devices=(CONST, CONST), shape=(2, 2), seed=0, **kw):
    tc = TransferConfig(devices, transfer_every=transfer_every, gamma=gamma, transfer_lr=transfer_lr, **kw)
    return TransferCompound(*shape, cfg(tc, forward, update), stream(seed, "t"))


def test_forward_mixing():
    c = compound(gamma=0.0)
    c.slow.set_weights(np.eye(2) * 0.3)
    c.fast.set_weights(np.full((2, 2), 0.1))
    x = np.array([1.0, -0.5])
    np.testing.assert_array_equal(c.forward(x), c.slow.forward(x))
    c1 = compound(gamma=1.0)
    c1.slow.set_weights(np.eye(2) * 0.3)
    c1.fast.set_weights(np.full((2, 2), 0.1))
    np.testing.assert_allclose(c1.forward(x), (np.eye(2) * 0.3 + 0.1) @ x)


def test_gamma_half_arithmetic():
    c = compound(gamma=0.5, shape=(1, 1), devices=(DeviceParams(w_max=2), DeviceParams(w_max=2)))
    c.slow.set_weights(np.eye(1))
    c.fast.set_weights(np.eye(1))
    np.testing.assert_allclose(c.forward(np.array([1.0])), [1.5])


def test_zero_fast_tile_transfer_leaves_slow():
    c = compound()
    c.slow.set_weights(np.full((2, 2), 0.2))
    for _ in range(4):
        c.transfer_step()
    np.testing.assert_array_equal(c.slow.get_weights(), 0.2)
    assert c.next_column == 0 and c.n_transfers == 4


def test_never_transfer_is_plain_sgd_on_fast():
    c = compound(transfer_every=None, update=EXACT)
    plain = AnalogTile(2, 2, cfg(CONST, update=EXACT), stream(9, "t"))
    c.slow.set_weights(np.full((2, 2), 0.1))
    rng = stream(2, "u")
    for _ in range(20):
        x, d = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        c.update(x, d, 0.05)
        plain.update(x, d, 0.05)
    np.testing.assert_array_equal(c.slow.get_weights(), 0.1)
    np.testing.assert_allclose(c.fast.get_weights(), plain.get_weights(), atol=1e-15)
    assert c.n_transfers == 0


def test_schedule_counts():
    for every in (1, 2, 3, 5):
        c = compound(transfer_every=every)
        for _ in range(17):
            c.update(np.ones(2), np.ones(2), 0.001)
        assert c.n_transfers == 17 // every


def test_units_in_mbatch_counts_batches():
    c = compound(transfer_every=1, units_in_mbatch=True)
    for _ in range(4):
        c.update(np.ones(2), np.ones(2), 0.001)
    assert c.units == 0
    c.on_batch_end()
    assert c.units == 1 and c.n_transfers == 1


def test_columns_per_event():
    c = compound(transfer_every=2, transfer_columns_per_event=2, shape=(2, 3))
    for _ in range(4):
        c.update(np.ones(3), np.ones(2), 0.001)
    assert c.n_transfers == 4 and c.next_column == 1


def _rint_update(w, x, d, lr, dw):
    return w + dw * np.rint(lr * np.abs(np.outer(d, x)) / dw) * np.sign(np.outer(d, x))


def test_step_by_step_oracle_2x2():
    dw, lr, tlr = 1e-3, 0.02, 0.1
    c = compound(transfer_every=1, transfer_lr=tlr, update=EXACT)
    a = np.zeros((2, 2))
    cc = np.zeros((2, 2))
    col = 0
    rng = stream(3, "u")
    for _ in range(12):
        x, d = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        c.update(x, d, lr)
        a = _rint_update(a, x, d, lr, dw)
        e = np.eye(2)[col]
        cc = _rint_update(cc, e, a[:, col], tlr, dw)
        col = (col + 1) % 2
        np.testing.assert_allclose(c.fast.get_weights(), a, atol=1e-12)
        np.testing.assert_allclose(c.slow.get_weights(), cc, atol=1e-12)


@pytest.mark.slow
def test_transfer_expectation_is_scaled_column():
    tlr = 0.02
    c = compound(transfer_every=None, transfer_lr=tlr, shape=(3, 2))
    a = np.array([[0.3, 0.1], [-0.2, 0.0], [0.5, -0.4]])
    c.fast.set_weights(a)
    acc = np.zeros(3)
    n = 20_000
    for _ in range(n):
        c.slow.weights.fill(0.0)
        c.transfer_step(column=0)
        acc += c.slow.weights[:, 0]
        assert not c.slow.weights[:, 1].any()
    np.testing.assert_allclose(acc / n, tlr * a[:, 0], rtol=0.03)


@pytest.mark.slow
def test_noisy_read_is_unbiased():
    c = compound(transfer_every=None, forward=IOParams(sigma_out=0.1, adc_bits=0, dac_bits=0), shape=(3, 2))
    a = np.array([[0.3, 0.1], [-0.2, 0.0], [0.5, -0.4]])
    c.fast.set_weights(a)
    reads = np.array([c.read_column(1) for _ in range(20_000)])
    se = reads.std(axis=0, ddof=1) / np.sqrt(len(reads))
    assert np.all(np.abs(reads.mean(axis=0) - a[:, 1]) < 4 * se)
    # the transferred increment follows the noisy read on average
    tlr = 0.02
    c = compound(transfer_every=None, transfer_lr=tlr, forward=IOParams(sigma_out=0.1, adc_bits=0, dac_bits=0),
                 shape=(3, 2))
    c.fast.set_weights(a)
    acc = np.zeros(3)
    n = 20_000
    for _ in range(n):
        c.slow.weights.fill(0.0)
        c.transfer_step(column=1)
        acc += c.slow.weights[:, 1]
    np.testing.assert_allclose(acc / n, tlr * a[:, 1], atol=0.05 * tlr * 0.4)


def test_transfer_forward_override():
    io = IOParams(sigma_out=0.0, adc_bits=0, dac_bits=0)
    c = compound(forward=IOParams(sigma_out=1.0), transfer_forward=io)
    c.fast.set_weights(np.array([[0.25, 0.0], [0.0, 0.0]]))
    np.testing.assert_allclose(c.read_column(0), [0.25, 0.0])


def test_compound_set_weights_and_bounds():
    c = compound(gamma=0.5)
    c.set_weights(np.full((2, 2), 0.3))
    np.testing.assert_allclose(c.slow.get_weights(), 0.3)
    np.testing.assert_array_equal(c.fast.get_weights(), 0.0)
    lo, hi = c.bounds()
    np.testing.assert_allclose(hi, 1.5)
    np.testing.assert_allclose(lo, -1.5)


def test_transfer_validation():
    with pytest.raises(ConfigError, match="transfer_every"):
        TransferConfig((CONST, CONST), transfer_every=0)
    with pytest.raises(ConfigError, match="transfer_lr"):
        TransferConfig((CONST, CONST), transfer_lr=0.0)
    with pytest.raises(ConfigError, match="gamma"):
        TransferConfig((CONST, CONST), gamma=-1)
    with pytest.raises(ConfigError, match="unit_cell_devices"):
        TransferConfig((CONST,))
    with pytest.raises(ConfigError, match="transfer_columns_per_event"):
        TransferConfig((CONST, CONST), transfer_columns_per_event=0)


def test_make_tile_dispatch():
    assert isinstance(make_tile(2, 2, cfg(CONST)), AnalogTile)
    assert isinstance(make_tile(2, 2, cfg(UnitCellConfig())), UnitCellTile)
    assert isinstance(make_tile(2, 2, cfg(TransferConfig())), TransferCompound)
