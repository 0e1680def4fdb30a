# -*- coding: utf-8 -*-
"""
"""

import asyncio

import pytest
import tornado.ioloop

from attn_game import utils


def test_async_task_manager():
    async_task_mgr = utils.AsyncTaskManager()
    assert async_task_mgr is utils.AsyncTaskManager()

    async def task():
        await asyncio.sleep(0.1)
        return 42

    async def crash():
        raise ValueError("crash")

    async def main():
        future = async_task_mgr.start_task(task(), "task")
        await asyncio.sleep(0.01)
        assert "task" in async_task_mgr.running_tasks
        assert await future == 42
        assert "task" not in async_task_mgr.running_tasks
        result = await async_task_mgr.wrap_task(crash(), "crash", lambda ex: str(ex))
        assert result == "crash"
        assert await async_task_mgr.wrap_task(crash(), "crash") is None
        return True

    assert tornado.ioloop.IOLoop.current().run_sync(main)


def test_config_hash():
    first = utils.config_hash([("beta", 0.1), ("alpha", 0.01)])
    assert len(first) == 12
    assert first == utils.config_hash([("alpha", 0.01), ("beta", 0.1)])
    assert first != utils.config_hash([("alpha", 0.01), ("beta", 0.2)])


def test_csv(tmp_path):
    path = str(tmp_path / "table.csv")
    utils.write_csv(path, ["name", "value", "missing"], [["a", 0.5, None], ["b", 3, 1.0 / 3]])
    with open(path) as fp:
        assert fp.read() == "name,value,missing\na,0.500000,\nb,3,0.333333\n"
    assert utils.read_csv(path)[1] == {"name": "b", "value": "3", "missing": "0.333333"}


def test_errors():
    error = utils.FormatError("Bad magic", 12)
    assert error.offset == 12
    assert str(error) == "Bad magic at byte offset 12"
    with pytest.raises(KeyError):
        raise utils.UnknownObjectError("unknown")
    assert issubclass(utils.DimensionError, utils.ParamError)
    assert issubclass(utils.DegenerateLanguageError, utils.UndefinedCorrelationError)
    error = utils.TrainingDivergedError("diverged", {"step": 3})
    assert isinstance(error, utils.NumericError)
    assert error.diagnostic == {"step": 3}
    assert utils.ConfigError("bad").keys == []


def test_ensure_dir(tmp_path):
    path = str(tmp_path / "a" / "b")
    assert utils.ensure_dir(path) == path
    assert utils.ensure_dir(path) == path
