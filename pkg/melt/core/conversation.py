from __future__ import annotations

import json
import logging
import pathlib as pt

import toml

import melt.const.error as error_const
import melt.schema.event as event_schema

logger = logging.getLogger(__name__)


def parse_conversations(text: str, suffix: str = ".toml", source: str = "<string>") -> event_schema.ConversationSet:
    """Prompt sets are `conversations = [{prompts = [{tokens, gen_tokens?}]}]`, as TOML or JSON."""
    try:
        document = json.loads(text) if suffix == ".json" else toml.loads(text)
        return event_schema.ConversationSet.model_validate(document)
    except (toml.TomlDecodeError, ValueError) as e:
        error_const.CoreError.MANIFEST_INVALID.build(path=source, reason=str(e)).raise_()


def load_conversations(uri: str | pt.Path, base_dir: pt.Path = pt.Path(".")) -> event_schema.ConversationSet:
    path = pt.Path(str(uri).removeprefix("file://"))
    if not path.is_absolute():
        path = base_dir / path
    if not path.is_file():
        error_const.CoreError.MANIFEST_INVALID.build(path=str(path), reason="file not found").raise_()
    conversations = parse_conversations(path.read_text(encoding="utf-8"), path.suffix.lower(), str(path))
    logger.debug(f"{path}: {len(conversations.conversations)} conversations, {conversations.prompt_count} prompts")
    return conversations
