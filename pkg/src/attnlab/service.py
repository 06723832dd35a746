"""HTTP JSON API exposing runs, importance heatmaps, attention matrices, and
pattern evaluation to the workbench.

Read endpoints are side-effect free and never touch model parameters; POST
endpoints mutate only in-process session state or write the injection config
file for the trainer to consume. Long pattern evaluations run as polled jobs
(one at a time per session). Analysis responses reuse the same serializers
as the CLI, so equal inputs produce equal JSON.
"""

from __future__ import annotations

import json
import os
import threading

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from . import importance as importance_mod
from . import patterns as patterns_mod
from .corpus import Dataset, Vocab, load_dataset
from .model import Model, load_checkpoint
from .runconfig import canonical_json, get, require


class ServiceState:
    """Loaded checkpoint + datasets, registered patterns, jobs, caches."""

    def __init__(self, model: Model, checkpoint_id: str, datasets: dict,
                 split: str, runs_dir: str | None, injection_path: str,
                 data_cfg: dict, significance: float = 0.01):
        self.model = model
        self.checkpoint_id = checkpoint_id
        self.datasets = datasets
        self.split = split
        self.runs_dir = runs_dir
        self.injection_path = injection_path
        self.data_cfg = data_cfg
        self.significance = significance
        self.patterns: dict[str, patterns_mod.PatternSpec] = {}
        self.jobs: dict[str, dict] = {}
        self._job_seq = 0
        self._lock = threading.Lock()
        self._busy = False
        self._traces: dict = {}
        self._importance: dict = {}

    def dataset(self, split: str) -> Dataset:
        if split not in self.datasets:
            raise HTTPException(404, f"unknown split {split!r}")
        return self.datasets[split]

    def find_doc(self, doc_id: str):
        for split, ds in self.datasets.items():
            for doc in ds.documents:
                if doc.id == doc_id:
                    return split, doc
        raise HTTPException(404, f"unknown document {doc_id!r}")

    def trace(self, doc):
        if doc.id not in self._traces:
            self._traces[doc.id] = self.model.forward(doc)
        return self._traces[doc.id]

    def importance_report(self, method: str):
        if method not in self._importance:
            self._importance[method] = importance_mod.estimate(
                self.model, self.dataset(self.split), method)
        return self._importance[method]


def build_state(cfg: dict) -> ServiceState:
    ckpt_path = require(cfg, "serve.checkpoint")
    if not os.path.exists(ckpt_path):
        raise FileNotFoundError(f"checkpoint not found: {ckpt_path}")
    model = load_checkpoint(ckpt_path)
    vocab_path = require(cfg, "data.vocab")
    if not os.path.exists(vocab_path):
        raise FileNotFoundError(f"vocab not found: {vocab_path}")
    vocab = Vocab.load(vocab_path)
    truncation = require(cfg, "data.truncation")
    oracle_sents = get(cfg, "data.oracle_sents", 2)
    datasets = {}
    for split in ("train", "val"):
        path = get(cfg, f"data.{split}")
        if path:
            if not os.path.exists(path):
                raise FileNotFoundError(f"{split} split not found: {path}")
            datasets[split] = load_dataset(path, vocab, truncation, split,
                                           oracle_sents=oracle_sents)
    if not datasets:
        raise FileNotFoundError("no dataset splits configured")
    split = get(cfg, "serve.split", "val" if "val" in datasets else next(iter(datasets)))
    return ServiceState(
        model, os.path.basename(ckpt_path), datasets, split,
        get(cfg, "serve.runs_dir"),
        get(cfg, "serve.injection_config", "injection_config.json"),
        data_cfg=dict(require(cfg, "data")),
        significance=get(cfg, "gr.significance", 0.01),
    )


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise HTTPException(400, "request body is not valid JSON")
    if not isinstance(body, dict):
        raise HTTPException(400, "request body must be a JSON object")
    return body


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="attnlab service")

    @app.exception_handler(HTTPException)
    async def _err(request, exc):
        return JSONResponse(status_code=exc.status_code,
                            content={"error": exc.detail})

    @app.get("/api/info")
    def info():
        return {
            "checkpoint": state.checkpoint_id,
            "model": state.model.config.to_dict(),
            "pal": state.model.pal.to_dict() if state.model.pal else None,
            "heads": [{"layer": h.layer, "head": h.head, "family": h.family}
                      for h in state.model.head_ids()],
            "splits": {name: len(ds.documents) for name, ds in state.datasets.items()},
            "split": state.split,
            "significance": state.significance,
        }

    @app.get("/api/docs")
    def docs(split: str = ""):
        split = split or state.split
        ds = state.dataset(split)
        return {"split": split,
                "docs": [{"id": d.id, "n_sentences": d.n_sentences, "n_tokens": d.n}
                         for d in ds.documents]}

    @app.get("/api/doc/{doc_id}")
    def doc_detail(doc_id: str):
        split, doc = state.find_doc(doc_id)
        vocab = state.datasets[split].vocab
        return {
            "id": doc.id, "split": split,
            "tokens": vocab.decode(doc.flat),
            "spans": [list(s) for s in doc.spans],
            "sentences": [[vocab.id_to_token[t] for t in s] for s in doc.sentences],
            "gold_summary": [[vocab.id_to_token[t] for t in s] for s in doc.gold_summary],
            "oracle_labels": doc.oracle_labels,
        }

    @app.get("/api/importance")
    def importance(method: str = "taylor"):
        if method not in importance_mod.METHODS:
            raise HTTPException(400, f"unknown method {method!r}")
        return state.importance_report(method).to_json_obj()

    @app.get("/api/attention")
    def attention(doc: str, layer: int, head: int, family: str = "encoder"):
        split, document = state.find_doc(doc)
        hid = None
        for candidate in state.model.head_ids():
            if (candidate.layer, candidate.head, candidate.family) == (layer, head, family):
                hid = candidate
                break
        if hid is None:
            raise HTTPException(404, f"unknown head {family}:{layer}:{head}")
        trace = state.trace(document)
        vocab = state.datasets[split].vocab
        return {"doc": doc, "layer": layer, "head": head, "family": family,
                "tokens": vocab.decode(document.flat),
                "matrix": trace.attention[hid].tolist()}

    @app.get("/api/patterns")
    def list_patterns():
        return {"patterns": [p.to_dict() for p in state.patterns.values()]}

    @app.post("/api/patterns")
    async def register_pattern(request: Request):
        body = await _json_body(request)
        try:
            spec = patterns_mod.PatternSpec.from_dict(body)
        except (KeyError, ValueError, TypeError) as e:
            raise HTTPException(400, f"invalid pattern spec: {e}")
        state.patterns[spec.name] = spec
        return {"registered": spec.to_dict()}

    @app.post("/api/patterns/{name}/evaluate")
    async def evaluate_pattern(name: str, request: Request):
        if name not in state.patterns:
            raise HTTPException(404, f"unknown pattern {name!r}")
        body = {}
        if (await request.body()):
            body = await _json_body(request)
        split = body.get("split", state.split)
        ds = state.dataset(split)
        with state._lock:
            if state._busy:
                raise HTTPException(409, "an evaluation job is already running")
            state._busy = True
            state._job_seq += 1
            job_id = f"job-{state._job_seq}"
            state.jobs[job_id] = {"id": job_id, "status": "running",
                                  "pattern": name, "split": split}

        def work():
            try:
                report = patterns_mod.gr_dataset(state.model, ds,
                                                 state.patterns[name],
                                                 significance=state.significance)
                state.jobs[job_id]["result_json"] = patterns_mod.relevance_to_json(report)
                state.jobs[job_id]["status"] = "done"
            except Exception as e:  # surfaced verbatim to the client
                state.jobs[job_id]["status"] = "error"
                state.jobs[job_id]["error"] = str(e)
            finally:
                state._busy = False

        threading.Thread(target=work, daemon=True).start()
        return {"job": job_id}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        if job_id not in state.jobs:
            raise HTTPException(404, f"unknown job {job_id!r}")
        job = state.jobs[job_id]
        out = {"id": job["id"], "status": job["status"],
               "pattern": job["pattern"], "split": job["split"]}
        if job["status"] == "done":
            out["result"] = json.loads(job["result_json"])
        if job["status"] == "error":
            out["error"] = job["error"]
        return out

    @app.get("/api/injection-config")
    def injection_get():
        if os.path.exists(state.injection_path):
            with open(state.injection_path) as f:
                return json.load(f)
        return {"patterns": {"assignments": []}}

    @app.post("/api/injection-config")
    async def injection_post(request: Request):
        body = await _json_body(request)
        raw = body.get("assignments")
        if not isinstance(raw, list):
            raise HTTPException(400, "assignments must be a list")
        try:
            assignments = [patterns_mod.HeadAssignment.from_dict(d) for d in raw]
        except (KeyError, ValueError, TypeError) as e:
            raise HTTPException(400, f"invalid assignment: {e}")
        for asg in assignments:
            if asg.head >= state.model.config.n_heads:
                raise HTTPException(400, f"head {asg.head} out of range")
            if asg.layer is not None and asg.layer >= state.model.config.n_layers:
                raise HTTPException(400, f"layer {asg.layer} out of range")
        # a complete, runnable training config: export -> train needs no edits
        cfg = {
            "model": state.model.config.to_dict(),
            "data": state.data_cfg,
            "train": {"steps": 200, "validate_every": 50, "batch_size": 8,
                      "grad_accum": 1, "warmup": 20, "peak_lr": 2e-3,
                      "beta1": 0.9, "beta2": 0.999, "eps": 1e-8,
                      "seed": 0, "top_k": 3, "eval_k": 2,
                      "eval_blocking": False},
            "patterns": {"assignments": [a.to_dict() for a in assignments]},
        }
        with open(state.injection_path, "w") as f:
            f.write(canonical_json(cfg))
        return {"written": state.injection_path,
                "assignments": [a.to_dict() for a in assignments]}

    @app.get("/api/runs")
    def runs():
        out = []
        if state.runs_dir and os.path.isdir(state.runs_dir):
            for name in sorted(os.listdir(state.runs_dir)):
                if os.path.exists(os.path.join(state.runs_dir, name, "runlog.json")):
                    out.append({"id": name})
        return {"runs": out}

    @app.get("/api/runs/{run_id}")
    def run_detail(run_id: str):
        if not state.runs_dir:
            raise HTTPException(404, "no runs directory configured")
        path = os.path.join(state.runs_dir, run_id, "runlog.json")
        if not os.path.exists(path):
            raise HTTPException(404, f"unknown run {run_id!r}")
        with open(path) as f:
            return json.load(f)

    return app


def serve(cfg: dict) -> None:
    import uvicorn
    state = build_state(cfg)
    app = create_app(state)
    uvicorn.run(app, host=get(cfg, "serve.host", "127.0.0.1"),
                port=get(cfg, "serve.port", 8337), log_level="warning")
