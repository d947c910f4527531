"""
ShareGPT-style JSONL export of training trajectories.

Each line is one conversation. Messages carry a ``loss`` flag: assistant
replies are ``model`` (trained on); system, user and tool messages are
``context`` (conditioned on only). The full trajectory rides along under
``meta`` so an export can be loaded back.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Iterable, List, Union

from src.protocol.trajectory import Trajectory, TrajectoryStatus
from src.render.storage import page_filename

logger = logging.getLogger("corpus")


@dataclass
class ExportReport:
    written: int = 0
    skipped: int = 0
    skipped_ids: List[str] = field(default_factory=list)

    def to_dict(self):
        return {"written": self.written, "skipped": self.skipped, "skipped_ids": self.skipped_ids}


def conversation_record(trajectory: Trajectory, image_root: str = "") -> dict:
    base = PurePosixPath(image_root, trajectory.sample_id)
    return {
        "id": trajectory.sample_id,
        "messages": trajectory.messages(),
        "images": [str(base / page_filename(k)) for k in range(1, trajectory.page_count + 1)],
        "meta": trajectory.to_dict(),
    }


def export_sft_dataset(trajectories: Iterable[Trajectory], path: Union[str, Path],
                       image_root: str = "") -> ExportReport:
    """
    Write trajectories as JSONL conversations.

    Trajectories with protocol_error status are skipped and counted. Image
    paths are ``<image_root>/<sample_id>/page_NNNN.png``, relative to the
    directory holding ``path``.

    Returns:
        ExportReport with written and skipped counts
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report = ExportReport()
    with path.open("w", encoding="utf-8") as handle:
        for trajectory in trajectories:
            if trajectory.status == TrajectoryStatus.PROTOCOL_ERROR:
                report.skipped += 1
                report.skipped_ids.append(trajectory.sample_id)
                continue
            handle.write(json.dumps(conversation_record(trajectory, image_root), ensure_ascii=False) + "\n")
            report.written += 1
    logger.info(f"Exported {report.written} conversations to {path} ({report.skipped} skipped)")
    return report


def load_sft_dataset(path: Union[str, Path]) -> List[Trajectory]:
    """Load trajectories back from an exported JSONL file."""
    trajectories = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                trajectories.append(Trajectory.from_dict(json.loads(line)["meta"]))
    return trajectories
