import time

import pytest

from toolloop.server.pool import WorkerPool, run_with_watchdog


def test_watchdog_ok():
    assert run_with_watchdog(lambda: 42, timeout_s=1.0) == ("ok", 42)


def test_watchdog_error_carries_exception():
    def boom():
        raise RuntimeError("nope")

    status, exc = run_with_watchdog(boom, timeout_s=1.0)
    assert status == "error"
    assert isinstance(exc, RuntimeError)


def test_watchdog_timeout_within_slack():
    start = time.perf_counter()
    status, _ = run_with_watchdog(lambda: time.sleep(2.0), timeout_s=0.2)
    elapsed = time.perf_counter() - start
    assert status == "timeout"
    assert elapsed < 0.2 + 0.25


def test_pool_bounds_concurrency():
    pool = WorkerPool(max_concurrent=8, per_call_timeout_ms=5000)
    futures = [pool.submit(time.sleep, 0.05) for _ in range(64)]
    for f in futures:
        f.result()
    assert pool.peak_in_flight <= 8
    assert pool.in_flight == 0
    pool.shutdown()


def test_pool_runs_everything():
    pool = WorkerPool(max_concurrent=3, per_call_timeout_ms=5000)
    futures = [pool.submit(lambda i=i: i * i) for i in range(20)]
    assert [f.result() for f in futures] == [i * i for i in range(20)]
    pool.shutdown()


def test_pool_shutdown_drains():
    pool = WorkerPool(max_concurrent=2, per_call_timeout_ms=5000)
    done = []
    for i in range(4):
        pool.submit(lambda i=i: (time.sleep(0.1), done.append(i)))
    pool.shutdown(wait=True)
    assert sorted(done) == [0, 1, 2, 3]


def test_pool_validates_arguments():
    with pytest.raises(ValueError):
        WorkerPool(0, 1000)
    with pytest.raises(ValueError):
        WorkerPool(1, 0)
