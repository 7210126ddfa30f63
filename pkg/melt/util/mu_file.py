import hashlib
import os
import pathlib as pt
import typing

import aiofiles


def fileobj_sha256(fp: typing.BinaryIO) -> str:
    hash_sha256 = hashlib.sha256()
    fp.seek(0)
    for chunk in iter(lambda: fp.read(4096), b""):
        hash_sha256.update(chunk)
    fp.seek(0)
    return hash_sha256.hexdigest()


def file_sha256(fname: os.PathLike) -> str:
    with open(fname, "rb") as fp:
        return fileobj_sha256(fp)


def assure_dir(target_path: pt.Path) -> pt.Path:
    target_path.mkdir(parents=True, exist_ok=True)
    return target_path


def save_bytes(data: bytes, save_path: pt.Path) -> pt.Path:
    assure_dir(save_path.parent)
    save_path.write_bytes(data)
    return save_path


async def async_save_bytes(data: bytes, save_path: pt.Path, *, chunk_size: int = 1 << 16) -> pt.Path:
    assure_dir(save_path.parent)
    async with aiofiles.open(save_path, "wb") as f:
        for offset in range(0, len(data), chunk_size):
            await f.write(data[offset : offset + chunk_size])
    return save_path


async def async_read_bytes(load_path: pt.Path) -> bytes:
    async with aiofiles.open(load_path, "rb") as f:
        return await f.read()
