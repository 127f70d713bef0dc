"""
Experiment Runner - CLI 명령 구현 (전처리, 합성, 학습, 평가, 비교, 스윕, 분포, 어블레이션, 효율)
"""
import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..data.features import load_modal_features
from ..data.loader import build_sequences, dataset_statistics, kcore_filter, load_interactions, write_id_maps
from ..data.manifest import IMAGE_FEATURES_FILE, SPLIT_MANIFEST_FILE, TEXT_FEATURES_FILE, write_split_manifest
from ..data.split import leave_one_out_split
from ..data.synthetic import SyntheticConfig, generate_synthetic, save_synthetic
from ..domain.errors import ConfigError
from ..domain.models import DatasetStats, NegativeTrace, SamplingStrategy
from ..encoder.snapshot import PolicySnapshot
from ..evaluation.efficiency import measure_efficiency
from ..evaluation.evaluator import (
    export_logit_distributions,
    false_negative_suppression,
    mean_false_negative_rank,
    write_histogram_csv,
    write_raw_logits,
    write_report_json,
)
from ..evaluation.models import EfficiencyReport, EvalReport, LogitDistribution
from ..factory import RunFactory
from ..infrastructure.config import Settings
from ..trainer.checkpoint import STATE_FILE, read_checkpoint_policy
from ..trainer.rng import RngStreams
from .config_parser import RunConfig
from .manifest import ExperimentManifest, hash_inputs

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.yaml"
METRICS_FILE = "metrics.jsonl"
NEGATIVES_FILE = "negatives.jsonl"
STAGE1_DIR = "stage1"
STAGE2_DIR = "stage2"
STRATEGY_ORDER = tuple(s.value for s in (SamplingStrategy.RANDOM, SamplingStrategy.ARGMAX, SamplingStrategy.TOPK))
SWEEP_PARAMS = {"K": "dpo.K", "beta": "dpo.beta"}
ABLATION_VARIANTS = ("full", "w/o sparse MoE", "w/o DPO")


@dataclass
class TrainOutcome:
    """train 명령 결과"""
    sft: Optional[PolicySnapshot] = None
    policy: Optional[PolicySnapshot] = None
    report: Optional[EvalReport] = None
    paths: Dict[str, Path] = field(default_factory=dict)


def append_negative_trace(trace: NegativeTrace, path: Union[str, Path]) -> Path:
    """샘플링 기록을 JSONL 로 추가"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as f:
        for record in trace:
            f.write(json.dumps(record.to_dict()) + "\n")
    return path


class ExperimentRunner:
    """명령 단위 실험 실행기"""

    def __init__(self, config: Optional[RunConfig] = None, settings: Optional[Settings] = None):
        self.config = config
        self.settings = settings or Settings()

    def _require_config(self) -> RunConfig:
        if self.config is None:
            raise ConfigError("this command needs --config")
        return self.config

    def _manifest(self, command: str, config: RunConfig, out: Path, **extra) -> ExperimentManifest:
        """입력 해시 / 시드 / 설정 기록 후 저장"""
        inputs = [config.data.dataset_dir] if config.data.dataset_dir else []
        manifest = ExperimentManifest(
            command=command,
            config=config.to_dict(),
            inputs=hash_inputs(inputs),
            seeds=RngStreams(config.seed).describe(),
            extra=extra,
        )
        manifest.save(out)
        return manifest

    # ============ Data ============

    def preprocess(
        self,
        input_path: Union[str, Path],
        output_dir: Union[str, Path],
        kcore: int = 5,
        max_seq_len: int = 50,
        text_features: Optional[Union[str, Path]] = None,
        image_features: Optional[Union[str, Path]] = None,
    ) -> DatasetStats:
        """상호작용 로그 → 분할 매니페스트 + id 매핑 + 통계 (모든 검증 후 기록)"""
        raw = load_interactions(input_path)
        filtered = kcore_filter(raw, kcore)
        sequences, n_items = build_sequences(filtered)
        split = leave_one_out_split(sequences, n_items, max_seq_len)
        stats = dataset_statistics(sequences, n_items)
        features = {}
        for filename, source in ((TEXT_FEATURES_FILE, text_features), (IMAGE_FEATURES_FILE, image_features)):
            if source is not None:
                load_modal_features(source, n_items)
                features[filename] = Path(source)

        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_split_manifest(out / SPLIT_MANIFEST_FILE, split)
        write_id_maps(out / "id_maps.json", filtered)
        payload = stats.to_dict()
        payload["kcore"] = kcore
        payload["duplicates_dropped"] = raw.duplicates_dropped
        (out / "stats.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
        for filename, source in features.items():
            shutil.copyfile(source, out / filename)
        logger.info(f"전처리 완료: {out}")
        return stats

    def synth(self, output_dir: Union[str, Path], cfg: SyntheticConfig) -> Dict[str, Path]:
        """합성 데이터셋 생성 및 저장"""
        dataset = generate_synthetic(cfg)
        paths = save_synthetic(dataset, output_dir, cfg)
        logger.info(f"합성 데이터 저장: {output_dir}")
        return paths

    # ============ Training ============

    def train(self, stage: str = "both", strategy: Optional[str] = None) -> TrainOutcome:
        """Stage 1 / Stage 2 학습 (체크포인트가 있으면 이어서)"""
        if stage not in ("1", "2", "both"):
            raise ConfigError(f"stage must be 1, 2 or both, got {stage!r}")
        config = self._require_config()
        if strategy is not None:
            config = config.with_overrides([f"dpo.strategy={strategy}"])
        out = Path(config.output_dir)
        factory = RunFactory(config, self.settings)
        factory.load_dataset()

        outcome = TrainOutcome()
        outcome.paths = {
            "config": out / CONFIG_FILE,
            "metrics": out / METRICS_FILE,
            "stage1": out / STAGE1_DIR,
            "stage2": out / STAGE2_DIR,
            "negatives": out / NEGATIVES_FILE,
        }
        manifest = self._manifest("train", config, out, stage=stage)
        for name, path in outcome.paths.items():
            manifest.add_artifact(name, path)
        manifest.save(out)
        config.save_to_file(str(outcome.paths["config"]))

        trace = NegativeTrace()
        engine = factory.create_engine(
            metrics=factory.create_metrics_logger(outcome.paths["metrics"]),
            trace=trace,
        )
        if stage in ("1", "both"):
            outcome.sft = engine.stage1_warmup(checkpoint_dir=outcome.paths["stage1"], resume=True)
        if stage in ("2", "both"):
            if outcome.sft is None:
                outcome.sft = read_checkpoint_policy(outcome.paths["stage1"])
            if not (outcome.paths["stage2"] / STATE_FILE).is_file() and outcome.paths["negatives"].exists():
                outcome.paths["negatives"].unlink()
            outcome.policy = engine.stage2_rodpo(outcome.sft, checkpoint_dir=outcome.paths["stage2"], resume=True)
            append_negative_trace(trace, outcome.paths["negatives"])

        final = outcome.policy if outcome.policy is not None else outcome.sft
        outcome.report = factory.create_evaluator().evaluate(factory.create_scorer(final), "valid", config.eval.ks)
        write_report_json(outcome.report, out / "eval_valid.json")
        return outcome

    # ============ Evaluation ============

    def _config_for_checkpoint(self, checkpoint: Path) -> RunConfig:
        if self.config is not None:
            return self.config
        base = checkpoint if checkpoint.is_dir() else checkpoint.parent
        for directory in (base, base.parent):
            candidate = directory / CONFIG_FILE
            if candidate.is_file():
                return RunConfig.from_file(str(candidate))
        raise ConfigError(f"no {CONFIG_FILE} next to {checkpoint}; pass --config")

    def evaluate(self, checkpoint: Union[str, Path], split: str = "test", ks: Sequence[int] = (5, 10)) -> EvalReport:
        """체크포인트 평가 (참조 정책은 사용하지 않음)

        인기도 기준선 결과를 eval_<split>_popularity.json 에 함께 기록한다.
        """
        checkpoint = Path(checkpoint)
        policy = read_checkpoint_policy(checkpoint)
        config = self._config_for_checkpoint(checkpoint)
        factory = RunFactory(config, self.settings)
        evaluator = factory.create_evaluator()
        report = evaluator.evaluate(factory.create_scorer(policy), split, list(ks))
        baseline = evaluator.evaluate(factory.create_popularity_scorer(), split, list(ks))
        target_dir = checkpoint if checkpoint.is_dir() else checkpoint.parent
        write_report_json(report, target_dir / f"eval_{split}.json")
        write_report_json(baseline, target_dir / f"eval_{split}_popularity.json")
        logger.info(f"인기도 기준선 ({split}): {baseline.metrics}")
        return report

    def export_dist(
        self,
        checkpoint: Union[str, Path],
        output: Union[str, Path],
        bins: int = 100,
        split: str = "test",
    ) -> LogitDistribution:
        """히스토그램 CSV + 원시 로짓 + 요약 통계"""
        checkpoint = Path(checkpoint)
        policy = read_checkpoint_policy(checkpoint)
        config = self._config_for_checkpoint(checkpoint)
        factory = RunFactory(config, self.settings)
        distribution = export_logit_distributions(
            factory.create_scorer(policy), factory.load_dataset().split, bins=bins, which=split
        )
        output = Path(output)
        if output.suffix != ".csv":
            output = output / "logit_hist.csv"
        write_histogram_csv(distribution, output)
        write_raw_logits(distribution, output.with_name(f"{output.stem}_raw.csv"))
        write_report_json(distribution.to_dict(), output.with_name(f"{output.stem}_stats.json"))
        return distribution

    # ============ Experiments ============

    def _seed_configs(self, config: RunConfig, seeds: int) -> List[RunConfig]:
        if seeds < 1:
            raise ConfigError(f"--seeds must be >= 1, got {seeds}")
        return [config.with_overrides([f"seed={config.seed + r}"]) for r in range(seeds)]

    def compare_sampling(self, seeds: int = 5) -> pd.DataFrame:
        """세 샘플링 전략을 같은 π_sft 에서 비교"""
        config = self._require_config()
        out = Path(config.output_dir)
        factory = RunFactory(config, self.settings)
        dataset = factory.load_dataset()
        evaluator = factory.create_evaluator()
        manifest = self._manifest("compare-sampling", config, out, seeds=seeds, strategies=list(STRATEGY_ORDER))

        rows = []
        for seed_config in self._seed_configs(config, seeds):
            sft = factory.create_engine(seed_config).stage1_warmup()
            for strategy in STRATEGY_ORDER:
                run_config = seed_config.with_overrides([f"dpo.strategy={strategy}"])
                trace = NegativeTrace()
                policy = factory.create_engine(run_config, trace=trace).stage2_rodpo(sft)
                scorer = factory.create_scorer(policy, run_config)
                report = evaluator.evaluate(scorer, "test", [5])
                row = {
                    "seed": run_config.seed,
                    "strategy": strategy,
                    "ndcg@5": report.metric("ndcg", 5),
                    "mrr@5": report.metric("mrr", 5),
                }
                if dataset.labels is not None:
                    fn_rank = mean_false_negative_rank(scorer, dataset.split, dataset.labels)
                    stats = false_negative_suppression(trace, dataset.labels, dataset.catalog.n_items, {strategy: fn_rank})
                    row.update({
                        "fn_fraction": stats[strategy].hit_fraction,
                        "expected_random_fraction": stats[strategy].expected_random_fraction,
                        "max_collisions": stats[strategy].max_collisions,
                        "mean_fn_rank": stats[strategy].mean_false_negative_rank,
                    })
                rows.append(row)
                logger.info(f"[seed {run_config.seed}] {strategy}: NDCG@5={row['ndcg@5']:.4f}")

        runs = pd.DataFrame(rows)
        grouped = runs.groupby("strategy", sort=False)
        table = pd.DataFrame({
            "ndcg@5_mean": grouped["ndcg@5"].mean(),
            "ndcg@5_sd": grouped["ndcg@5"].std().fillna(0.0),
            "mrr@5_mean": grouped["mrr@5"].mean(),
            "mrr@5_sd": grouped["mrr@5"].std().fillna(0.0),
        })
        for column in ("fn_fraction", "expected_random_fraction", "max_collisions", "mean_fn_rank"):
            if column in runs:
                table[column] = grouped[column].mean()
        table = table.reindex(list(STRATEGY_ORDER)).reset_index().rename(columns={"index": "strategy"})

        runs.to_csv(out / "compare_sampling_runs.csv", index=False, encoding="utf-8")
        table.to_csv(out / "compare_sampling.csv", index=False, encoding="utf-8")
        manifest.add_artifact("table", out / "compare_sampling.csv")
        manifest.add_artifact("runs", out / "compare_sampling_runs.csv")
        manifest.save(out)
        return table

    def sweep(self, param: str, values: Sequence[str]) -> pd.DataFrame:
        """공유 π_sft 에서 K 또는 β 격자 Stage 2 실행"""
        config = self._require_config()
        if param not in SWEEP_PARAMS:
            raise ConfigError(f"--param must be one of {sorted(SWEEP_PARAMS)}, got {param!r}")
        if not values:
            raise ConfigError("--values is empty")
        grid = [config.with_overrides([f"{SWEEP_PARAMS[param]}={v}"]) for v in values]
        out = Path(config.output_dir)
        factory = RunFactory(config, self.settings)
        evaluator = factory.create_evaluator()
        manifest = self._manifest("sweep", config, out, param=param, values=list(values))

        sft = factory.create_engine(config).stage1_warmup()
        sft_checksum = sft.checksum()
        manifest.extra["sft_checksum"] = sft_checksum
        manifest.save(out)

        rows = []
        for value, run_config in zip(values, grid):
            policy = factory.create_engine(run_config).stage2_rodpo(sft)
            report = evaluator.evaluate(factory.create_scorer(policy, run_config), "test", config.eval.ks)
            row = {"param": param, "value": value}
            row.update(report.metrics)
            row["sft_checksum"] = sft_checksum
            rows.append(row)
        table = pd.DataFrame(rows)
        table.to_csv(out / "sweep.csv", index=False, encoding="utf-8")
        manifest.add_artifact("table", out / "sweep.csv")
        manifest.save(out)
        return table

    def ablate(self, seeds: int = 1) -> pd.DataFrame:
        """full / w/o sparse MoE / w/o DPO 비교"""
        config = self._require_config()
        out = Path(config.output_dir)
        factory = RunFactory(config, self.settings)
        evaluator = factory.create_evaluator()
        manifest = self._manifest("ablate", config, out, seeds=seeds, variants=list(ABLATION_VARIANTS))

        rows = []
        for seed_config in self._seed_configs(config, seeds):
            engine = factory.create_engine(seed_config)
            sft = engine.stage1_warmup()
            policies = {
                "full": (seed_config, engine.stage2_rodpo(sft)),
                "w/o DPO": (seed_config, factory.create_engine(seed_config).continue_ce(sft).final_policy),
            }
            dense_config = seed_config.with_overrides(["moe.variant=dense"])
            dense_engine = factory.create_engine(dense_config)
            policies["w/o sparse MoE"] = (dense_config, dense_engine.stage2_rodpo(dense_engine.stage1_warmup()))
            for variant in ABLATION_VARIANTS:
                run_config, policy = policies[variant]
                report = evaluator.evaluate(factory.create_scorer(policy, run_config), "test", [5, 10])
                rows.append({"variant": variant, **report.metrics})

        runs = pd.DataFrame(rows)
        table = runs.groupby("variant", sort=False)[["ndcg@5", "mrr@5", "ndcg@10", "mrr@10"]].mean().reset_index()
        table.to_csv(out / "ablation.csv", index=False, encoding="utf-8")
        manifest.add_artifact("table", out / "ablation.csv")
        manifest.save(out)
        return table

    def efficiency(self, batch_size: Optional[int] = None) -> EfficiencyReport:
        """학습 / 추론 효율 측정 (stage1 체크포인트가 있으면 그 정책 사용)"""
        config = self._require_config()
        out = Path(config.output_dir)
        factory = RunFactory(config, self.settings)
        engine = factory.create_engine()
        stage1 = out / STAGE1_DIR
        snapshot = read_checkpoint_policy(stage1) if (stage1 / STATE_FILE).is_file() else engine.initial_policy()
        report = measure_efficiency(
            config,
            factory.load_dataset(),
            snapshot,
            batch_size or config.eval.batch_size,
            iterations=config.eval.efficiency_iterations,
            warmup=config.eval.efficiency_warmup,
        )
        write_report_json(report, out / "efficiency.json")
        return report
