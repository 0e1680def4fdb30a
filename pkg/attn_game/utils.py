# -*- coding: utf-8 -*-
"""Miscellaneous utility functions and classes
"""

import asyncio
import csv
import hashlib
import logging
import os

logger = logging.getLogger("attn-game")


def verbose_logging(msg):
    if logger.level < logging.DEBUG:
        return logger.debug(msg)


logging._nameToLevel["VERBOSE"] = 5
logging._levelToName[5] = "VERBOSE"
logger.verbose = verbose_logging


class Singleton(object):
    """Singleton Decorator"""

    def __init__(self, cls):
        self.__instance = None
        self.__cls = cls

    def __call__(self, *args, **kwargs):
        if not self.__instance:
            self.__instance = self.__cls(*args, **kwargs)
        return self.__instance


@Singleton
class AsyncTaskManager(object):
    def __init__(self):
        self._async_tasks = []

    @property
    def running_tasks(self):
        return self._async_tasks

    async def wrap_task(self, task, name, cb_exc=None):
        self._async_tasks.append(name)
        logger.debug("[%s] Task %s start" % (self.__class__.__name__, name))
        result = None
        try:
            result = await task
        except asyncio.CancelledError:
            logger.warning(
                "[%s] Task %s force stopped" % (self.__class__.__name__, name)
            )
        except Exception as ex:
            if cb_exc:
                result = cb_exc(ex)
            else:
                logger.exception("[%s] Task %s crash" % (self.__class__.__name__, name))
        else:
            logger.debug("[%s] Task %s exit" % (self.__class__.__name__, name))
        self._async_tasks.remove(name)
        return result

    def start_task(self, task, name, cb_exc=None):
        return asyncio.ensure_future(self.wrap_task(task, name, cb_exc))


class ConfigError(RuntimeError):
    def __init__(self, message, keys=None):
        super(ConfigError, self).__init__(message)
        self.keys = list(keys or [])


class ParamError(RuntimeError):
    pass


class DimensionError(ParamError):
    pass


class NumericError(RuntimeError):
    pass


class TrainingDivergedError(NumericError):
    def __init__(self, message, diagnostic=None):
        super(TrainingDivergedError, self).__init__(message)
        self.diagnostic = dict(diagnostic or {})


class FormatError(RuntimeError):
    def __init__(self, message, offset=0):
        super(FormatError, self).__init__("%s at byte offset %d" % (message, offset))
        self.offset = offset


class UnknownObjectError(RuntimeError, KeyError):
    pass


class UndefinedCorrelationError(RuntimeError):
    pass


class DegenerateLanguageError(UndefinedCorrelationError):
    pass


def shape_str(shape):
    return "(%s)" % ", ".join(str(it) for it in shape)


def config_hash(items):
    """Stable short hash of a sorted list of (key, value) pairs"""
    text = "\n".join("%s=%r" % (key, value) for key, value in sorted(items))
    return hashlib.sha1(text.encode("utf-8")).hexdigest()[:12]


def ensure_dir(path):
    if not os.path.isdir(path):
        os.makedirs(path)
    return path


def format_float(value):
    if value is None:
        return ""
    return "%.6f" % value


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [format_float(it) if isinstance(it, float) else it for it in row]
            )


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fp:
        return list(csv.DictReader(fp))
