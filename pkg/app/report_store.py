import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

from .config import get_reports_dir
from .errors import ParseError
from .utils import dumps_json, file_digest, text_digest, format_file_size, sanitize_filename, write_json

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"


@dataclass
class RunManifest:
    """Everything needed to re-run a command: argv, resolved parameters and input/output digests"""

    command: str
    version: str
    seed: Optional[int]
    argv: List[str]
    parameters: Dict = field(default_factory=dict)
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)

    def record_inputs(self, paths: List[Optional[str]]):
        for path in paths:
            if path:
                self.inputs[path] = file_digest(path)

    def record_outputs(self, paths: List[Optional[str]]):
        for path in paths:
            if path and os.path.exists(path):
                self.outputs[path] = file_digest(path)

    def to_dict(self) -> Dict:
        return asdict(self)

    def write(self, file_path: str) -> str:
        return write_json(file_path, self.to_dict())

    @classmethod
    def load(cls, file_path: str) -> "RunManifest":
        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(e.msg, file_path, e.lineno, e.colno)
        except OSError as e:
            raise ParseError(f"cannot read manifest: {e.strerror}", file_path)
        missing = [name for name in ('command', 'version', 'argv') if name not in raw]
        if missing:
            raise ParseError(f"manifest is missing {', '.join(missing)}", file_path)
        return cls(
            command=raw['command'],
            version=raw['version'],
            seed=raw.get('seed'),
            argv=list(raw['argv']),
            parameters=raw.get('parameters', {}),
            inputs=raw.get('inputs', {}),
            outputs=raw.get('outputs', {}),
        )


class ReportStore:
    """Directory of JSON reports and run manifests.

    Filenames carry a digest of the content instead of a timestamp, so saving
    the same report twice yields the same file.
    """

    def __init__(self, reports_dir: Optional[str] = None):
        self.reports_dir = reports_dir or get_reports_dir()
        os.makedirs(self.reports_dir, exist_ok=True)

    def _path(self, filename: str) -> str:
        return os.path.join(self.reports_dir, os.path.basename(filename))

    def save_report(self, report: Dict, name: str = "estimate") -> str:
        """Save a report and return its path"""
        text = dumps_json(report)
        digest = text_digest(text)
        filepath = self._path(sanitize_filename(f"{name}_{digest[:12]}.json"))
        with open(filepath, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        logger.info("Saved report %s", filepath)
        return filepath

    def save_manifest(self, manifest: RunManifest) -> str:
        text = dumps_json(manifest.to_dict())
        filepath = self._path(sanitize_filename(f"{manifest.command}_{text_digest(text)[:12]}{MANIFEST_SUFFIX}"))
        with open(filepath, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        return filepath

    def list_reports(self) -> List[Dict]:
        """Summaries of every stored JSON file, sorted by filename"""
        entries = []
        for filename in sorted(os.listdir(self.reports_dir)):
            if not filename.endswith('.json'):
                continue
            filepath = self._path(filename)
            entry = {
                'filename': filename,
                'kind': 'manifest' if filename.endswith(MANIFEST_SUFFIX) else 'report',
                'size': format_file_size(os.path.getsize(filepath)),
            }
            content = self.get_report(filename)
            if not isinstance(content, dict):
                entry['error'] = 'unreadable JSON'
            else:
                entry['command'] = content.get('command')
                if 'sigma_hat' in content:
                    entry['sigma_hat'] = content['sigma_hat']
            entries.append(entry)
        return entries

    def get_report(self, filename: str) -> Optional[Dict]:
        filepath = self._path(filename)
        if not os.path.isfile(filepath):
            return None
        try:
            with open(filepath, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.warning("Cannot read report %s: %s", filepath, e)
            return None

    def delete_report(self, filename: str) -> bool:
        filepath = self._path(filename)
        if os.path.isfile(filepath):
            os.remove(filepath)
            return True
        return False

    def get_statistics(self) -> Dict:
        entries = self.list_reports()
        return {
            'total_reports': sum(1 for e in entries if e['kind'] == 'report'),
            'total_manifests': sum(1 for e in entries if e['kind'] == 'manifest'),
            'reports_dir': self.reports_dir,
        }
