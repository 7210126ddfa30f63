from __future__ import annotations

import dataclasses
import logging
import pathlib as pt
import urllib.parse

import pydantic
import toml

import melt.const.error as error_const
import melt.schema.core as core_schema
import melt.util.mu_file as file_util

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Registry:
    """Model zoo and device farm, read-only after load."""

    models: dict[str, core_schema.ModelDescriptor]
    devices: dict[str, core_schema.DeviceDescriptor]
    # Relative artifact paths resolve against this directory.
    base_dir: pt.Path = pt.Path(".")

    @classmethod
    def from_manifest(cls, manifest: core_schema.RegistryManifest, base_dir: pt.Path = pt.Path(".")) -> Registry:
        return cls(
            models={model.name: model for model in manifest.models},
            devices={device.id: device for device in manifest.devices},
            base_dir=base_dir,
        )

    def to_manifest(self) -> core_schema.RegistryManifest:
        return core_schema.RegistryManifest(models=list(self.models.values()), devices=list(self.devices.values()))


def parse_registry(text: str, base_dir: pt.Path = pt.Path("."), source: str = "<string>") -> Registry:
    try:
        manifest = core_schema.RegistryManifest.model_validate(toml.loads(text))
    except (toml.TomlDecodeError, pydantic.ValidationError) as e:
        error_const.CoreError.MANIFEST_INVALID.build(path=source, reason=str(e)).raise_()
    return Registry.from_manifest(manifest, base_dir)


def load_registry(path: pt.Path) -> Registry:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        error_const.CoreError.MANIFEST_INVALID.build(path=str(path), reason=str(e)).raise_()
    return parse_registry(text, base_dir=path.parent, source=str(path))


def dump_registry(registry: Registry) -> str:
    return toml.dumps(registry.to_manifest().model_dump(mode="json", exclude_none=True))


def local_artifact_path(uri: str | None, base_dir: pt.Path) -> pt.Path | None:
    """Only local artifacts can be verified; remote locators are left alone."""
    if not uri:
        return None
    parsed = urllib.parse.urlparse(uri)
    if parsed.scheme not in ("", "file"):
        return None
    path = pt.Path(urllib.parse.unquote(parsed.path) if parsed.scheme == "file" else uri)
    return path if path.is_absolute() else base_dir / path


def resolve_model(registry: Registry, name: str) -> core_schema.ModelDescriptor:
    if (model := registry.models.get(name)) is None:
        error_const.CoreError.MODEL_NOT_FOUND.build(name=name).raise_()

    artifact = local_artifact_path(model.artifact_uri, registry.base_dir)
    if artifact is None or not artifact.is_file():
        return model
    # Relative artifacts are pinned to the registry directory.
    model = model.model_copy(update={"artifact_uri": str(artifact.resolve())})

    actual = file_util.file_sha256(artifact)
    if model.artifact_digest is None:
        logger.info(f"Artifact of '{name}' has no recorded digest, using {actual}")
        return model.model_copy(update={"artifact_digest": actual})
    if actual != model.artifact_digest:
        error_const.CoreError.DIGEST_MISMATCH.build(name=name, actual=actual, expected=model.artifact_digest).raise_()
    return model


def resolve_device(registry: Registry, device_id: str) -> core_schema.DeviceDescriptor:
    if (device := registry.devices.get(device_id)) is None:
        error_const.CoreError.DEVICE_NOT_FOUND.build(name=device_id).raise_()
    return device
