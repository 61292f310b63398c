"""Key-value configuration files (``key = value`` lines, ``#`` comments)."""

import configparser
from pathlib import Path


def read_kv_file(path) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    parser.read_string("[main]\n" + Path(path).read_text())
    return dict(parser["main"])


def parse_list(value: str, cast=float) -> list:
    return [cast(v) for v in value.replace(",", " ").split()]
