"""
Pydantic models for configuration and JSONL records.

This module defines the data structures that cross a file or network
boundary: pipeline configuration, endpoint descriptors, raw input
samples and per-document page manifests.
"""

from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


ExpandKind = Literal["source_text", "ocr_text", "image_zoom"]


class EndpointConfig(BaseModel):
    """Descriptor of one chat-completion (or OCR) endpoint."""
    kind: Literal["http", "scripted"] = Field(default="http", description="Transport used for the endpoint")
    url: Optional[str] = Field(default=None, description="Full URL of the completion or OCR route")
    model: str = Field(default="", description="Model name sent with every request")
    auth_header: str = "Authorization"
    auth_scheme: str = "Bearer"
    api_key_env: Optional[str] = Field(default=None, description="Environment variable holding the secret")
    temperature: float = Field(default=0.0, ge=0.0)
    max_tokens: int = Field(default=2048, ge=1)
    seed: Optional[int] = None
    timeout: float = Field(default=120.0, gt=0)
    retry_attempts: int = Field(default=3, ge=1)
    retry_delay: float = Field(default=5.0, ge=0)
    replies: List[str] = Field(default_factory=list, description="Scripted replies, consumed in order")
    default_reply: Optional[str] = Field(default=None, description="Scripted reply once the list is exhausted")

    @model_validator(mode="after")
    def _http_needs_url(self):
        if self.kind == "http" and not self.url:
            raise ValueError("http endpoints require a url")
        return self


class RenderSettings(BaseModel):
    """Rasterization knobs shared by every preset."""
    metrics: Literal["font", "monospace"] = "font"
    font_path: str = "DejaVuSans.ttf"
    advance_ratio: float = Field(default=0.42, gt=0)
    encoder_profile: Literal["default", "glm"] = "default"
    zoom_scale: float = Field(default=3.0, gt=0)
    min_pixels: int = Field(default=1, ge=1)
    max_pixels: int = Field(default=4_194_304, ge=1)


class CorpusSettings(BaseModel):
    """Dataset construction knobs."""
    distractor_min: int = 3000
    distractor_max: int = 32000
    sft_fraction: float = Field(default=0.8, ge=0.0, le=1.0)
    distractor_pool: Optional[str] = None

    @model_validator(mode="after")
    def _range_inside_bounds(self):
        if not (3000 <= self.distractor_min <= self.distractor_max <= 32000):
            raise ValueError(
                f"distractor range [{self.distractor_min}, {self.distractor_max}] must lie within [3000, 32000]"
            )
        return self


class KvSettings(BaseModel):
    """Attention geometry used for KV-cache arithmetic."""
    layers: int = Field(default=8, ge=1)
    kv_heads: int = Field(default=4, ge=1)
    head_dim: int = Field(default=256, ge=1)
    dtype_bytes: int = Field(default=2, ge=1)


class PathSettings(BaseModel):
    input: Optional[str] = None
    output_dir: str = "out"


class PipelineConfig(BaseModel):
    """Validated configuration for every CLI subcommand."""
    presets: List[str] = Field(default_factory=lambda: ["5x"], min_length=1)
    expand_kind: ExpandKind = "source_text"
    max_turns: int = Field(default=6, ge=1)
    parallelism: int = Field(default=4, ge=1)
    seed: int = 0
    tokenizer: str = "char4"
    force_extract: bool = False
    paths: PathSettings = Field(default_factory=PathSettings)
    render: RenderSettings = Field(default_factory=RenderSettings)
    corpus: CorpusSettings = Field(default_factory=CorpusSettings)
    kv: KvSettings = Field(default_factory=KvSettings)
    endpoints: Dict[str, EndpointConfig] = Field(default_factory=dict)

    @field_validator("presets")
    @classmethod
    def _presets_exist(cls, names: List[str]) -> List[str]:
        from src.render.presets import PRESETS

        unknown = [name for name in names if name not in PRESETS]
        if unknown:
            raise ValueError(f"unknown preset(s) {unknown}; available: {sorted(PRESETS)}")
        return names

    @field_validator("endpoints")
    @classmethod
    def _endpoint_roles(cls, endpoints: Dict[str, EndpointConfig]) -> Dict[str, EndpointConfig]:
        unknown = set(endpoints) - {"model", "judge", "ocr", "synth"}
        if unknown:
            raise ValueError(f"unknown endpoint role(s): {sorted(unknown)}")
        return endpoints


class RawSampleRecord(BaseModel):
    """One line of the raw-sample JSONL input."""
    id: str
    question: str
    answers: List[str] = Field(..., min_length=1)
    document: str
    spans: List[Tuple[int, int]] = Field(default_factory=list)
    dataset: str = "default"
    hop_count: Optional[int] = Field(default=None, ge=1)
    source_tokens: Optional[int] = Field(default=None, ge=0, description="Injected token count N")

    @field_validator("spans")
    @classmethod
    def _ordered_spans(cls, spans: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
        for start, end in spans:
            if start < 0 or end <= start:
                raise ValueError(f"span ({start}, {end}) is not a nonempty interval")
        return spans


class PageRecord(BaseModel):
    index: int = Field(..., ge=1)
    width: int
    height: int
    char_span: Tuple[int, int]
    visual_tokens: int
    file: Optional[str] = None


class PageManifest(BaseModel):
    """Sidecar manifest written next to a document's page images."""
    doc_id: str
    preset: str
    encoder_profile: str
    source_char_count: int
    source_tokens: Optional[int] = None
    total_visual_tokens: int
    icr: Optional[float] = None
    pages: List[PageRecord] = Field(default_factory=list)
