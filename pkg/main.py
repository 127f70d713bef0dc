#!/usr/bin/env python3
"""
RoDPO 순차 추천 실험 하네스
Main CLI Interface
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from src.data.synthetic import EXPOSURE_MODES, SyntheticConfig
from src.domain.errors import ConfigError, DataFormatError, RoDPOError
from src.domain.models import SamplingStrategy
from src.experiment.config_parser import RunConfig
from src.experiment.runner import ExperimentRunner, SWEEP_PARAMS
from src.infrastructure.config import Settings, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def parse_int_list(value: str) -> List[int]:
    """'5,10' → [5, 10]"""
    try:
        result = [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")
    if not result:
        raise argparse.ArgumentTypeError("empty list")
    return result


def parse_str_list(value: str) -> List[str]:
    result = [v.strip() for v in value.split(",") if v.strip()]
    if not result:
        raise argparse.ArgumentTypeError("empty list")
    return result


def load_run_config(path: Optional[str], overrides: Sequence[str]) -> Optional[RunConfig]:
    """--config + --set 적용 (파일이 없으면 None)"""
    if path is None:
        if overrides:
            raise ConfigError("--set needs --config")
        return None
    config = RunConfig.from_file(path)
    return config.with_overrides(list(overrides)) if overrides else config


def print_eval_report(report) -> None:
    print(report.get_summary())


def run_preprocess(runner: ExperimentRunner, args) -> None:
    """상호작용 로그 전처리"""
    stats = runner.preprocess(
        args.input,
        args.output,
        kcore=args.kcore,
        max_seq_len=args.max_seq_len,
        text_features=args.text_features,
        image_features=args.image_features,
    )
    print("\n=== 데이터셋 통계 ===")
    print(f"  {stats.get_summary()}")


def run_synth(runner: ExperimentRunner, args, settings: Settings) -> None:
    """합성 거짓 음성 벤치마크 생성"""
    cfg = SyntheticConfig(
        n_users=args.users,
        n_items=args.items,
        latent_dim=args.latent_dim,
        seq_len_mean=args.seq_len_mean,
        exposure_rate=args.exposure_rate,
        seed=args.seed,
        exposure_mode=args.exposure_mode,
        max_seq_len=args.max_seq_len,
    )
    output = args.output or str(Path(settings.output_dir) / "synthetic")
    paths = runner.synth(output, cfg)
    print(f"\n=== 합성 데이터 생성 완료: {output} ===")
    for name, path in paths.items():
        print(f"  {name}: {path}")


def run_train(runner: ExperimentRunner, args) -> None:
    """학습 실행"""
    outcome = runner.train(stage=args.stage, strategy=args.strategy)
    if outcome.sft is not None:
        print(f"π_sft checksum: {outcome.sft.checksum()}")
    if outcome.policy is not None:
        print(f"RoDPO checksum: {outcome.policy.checksum()}")
    if outcome.report is not None:
        print_eval_report(outcome.report)


def run_experiment_table(title: str, table) -> None:
    print(f"\n=== {title} ===")
    print(table.to_string(index=False))


def create_parser() -> argparse.ArgumentParser:
    """CLI 파서 생성"""
    parser = argparse.ArgumentParser(
        description="RoDPO 순차 추천 실험 하네스",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--env", help=".env 파일 경로")

    subparsers = parser.add_subparsers(dest="command", help="명령어")

    def add_config_args(sub: argparse.ArgumentParser, required: bool = True) -> None:
        sub.add_argument("--config", required=required, help="YAML 실험 설정 파일")
        sub.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
            help="설정 덮어쓰기 (반복 가능)",
        )

    # 전처리
    pre_parser = subparsers.add_parser("preprocess", help="상호작용 로그 전처리")
    pre_parser.add_argument("--input", required=True, help="user<TAB>item<TAB>timestamp 파일")
    pre_parser.add_argument("--output", required=True, help="출력 디렉터리")
    pre_parser.add_argument("--kcore", type=int, default=5, help="k-core 임계값 (기본: 5)")
    pre_parser.add_argument("--max-seq-len", type=int, default=50, help="최대 시퀀스 길이 (기본: 50)")
    pre_parser.add_argument("--text-features", help="텍스트 특성 파일 (RODPOFM1)")
    pre_parser.add_argument("--image-features", help="이미지 특성 파일 (RODPOFM1)")

    # 합성 데이터
    synth_parser = subparsers.add_parser("synth", help="합성 거짓 음성 벤치마크 생성")
    synth_parser.add_argument("--users", type=int, default=1000, help="사용자 수 (기본: 1000)")
    synth_parser.add_argument("--items", type=int, default=500, help="아이템 수 (기본: 500)")
    synth_parser.add_argument("--exposure-rate", type=float, default=0.3, help="노출 비율 (기본: 0.3)")
    synth_parser.add_argument("--exposure-mode", choices=list(EXPOSURE_MODES), default="uniform", help="노출 분포")
    synth_parser.add_argument("--seed", type=int, default=0, help="시드")
    synth_parser.add_argument("--latent-dim", type=int, default=8, help="잠재 차원")
    synth_parser.add_argument("--seq-len-mean", type=float, default=12.0, help="평균 시퀀스 길이")
    synth_parser.add_argument("--max-seq-len", type=int, default=50, help="최대 시퀀스 길이")
    synth_parser.add_argument("--output", help="출력 디렉터리 (기본: $RODPO_OUTPUT_DIR/synthetic)")

    # 학습
    train_parser = subparsers.add_parser("train", help="Stage 1 / Stage 2 학습")
    add_config_args(train_parser)
    train_parser.add_argument("--strategy", choices=[s.value for s in SamplingStrategy], help="샘플링 전략")
    train_parser.add_argument("--stage", choices=["1", "2", "both"], default="both", help="학습 단계 (기본: both)")

    # 평가
    eval_parser = subparsers.add_parser("eval", help="체크포인트 평가")
    add_config_args(eval_parser, required=False)
    eval_parser.add_argument("--checkpoint", required=True, help="체크포인트 디렉터리 또는 스냅샷 파일")
    eval_parser.add_argument("--split", choices=["valid", "test"], default="test", help="평가 분할")
    eval_parser.add_argument("--ks", type=parse_int_list, default=[5, 10], help="컷오프 목록 (기본: 5,10)")

    # 샘플링 전략 비교
    compare_parser = subparsers.add_parser("compare-sampling", help="샘플링 전략 비교")
    add_config_args(compare_parser)
    compare_parser.add_argument("--seeds", type=int, default=5, help="시드 반복 수 (기본: 5)")

    # 민감도 스윕
    sweep_parser = subparsers.add_parser("sweep", help="K / β 민감도 스윕")
    add_config_args(sweep_parser)
    sweep_parser.add_argument("--param", choices=sorted(SWEEP_PARAMS), required=True, help="스윕 파라미터")
    sweep_parser.add_argument("--values", type=parse_str_list, required=True, help="값 목록 (쉼표 구분)")

    # 로짓 분포
    dist_parser = subparsers.add_parser("export-dist", help="양성 / 하드 음성 로짓 분포 내보내기")
    add_config_args(dist_parser, required=False)
    dist_parser.add_argument("--checkpoint", required=True, help="체크포인트 디렉터리 또는 스냅샷 파일")
    dist_parser.add_argument("--bins", type=int, default=100, help="히스토그램 구간 수 (기본: 100)")
    dist_parser.add_argument("--output", required=True, help="CSV 경로 또는 디렉터리")
    dist_parser.add_argument("--split", choices=["valid", "test"], default="test", help="평가 분할")

    # 구성요소 어블레이션
    ablate_parser = subparsers.add_parser("ablate", help="구성요소 어블레이션")
    add_config_args(ablate_parser)
    ablate_parser.add_argument("--seeds", type=int, default=1, help="시드 반복 수 (기본: 1)")

    # 효율
    eff_parser = subparsers.add_parser("efficiency", help="학습 / 추론 효율 측정")
    add_config_args(eff_parser)
    eff_parser.add_argument("--batch-size", type=int, help="배치 크기 (기본: eval.batch_size)")

    return parser


def dispatch(args, settings: Settings) -> None:
    """명령어 실행"""
    config = load_run_config(getattr(args, "config", None), getattr(args, "overrides", []))
    runner = ExperimentRunner(config, settings)

    if args.command == "preprocess":
        run_preprocess(runner, args)
    elif args.command == "synth":
        run_synth(runner, args, settings)
    elif args.command == "train":
        run_train(runner, args)
    elif args.command == "eval":
        print_eval_report(runner.evaluate(args.checkpoint, split=args.split, ks=args.ks))
    elif args.command == "compare-sampling":
        run_experiment_table("샘플링 전략 비교", runner.compare_sampling(seeds=args.seeds))
    elif args.command == "sweep":
        run_experiment_table(f"{args.param} 스윕", runner.sweep(args.param, args.values))
    elif args.command == "export-dist":
        distribution = runner.export_dist(args.checkpoint, args.output, bins=args.bins, split=args.split)
        print(f"\n=== 로짓 분포 ({distribution.bins} bins) ===")
        print(f"  positive peak density:      {distribution.positive_stats.peak_density:.6f}")
        print(f"  hard-negative peak density: {distribution.hard_negative_stats.peak_density:.6f}")
    elif args.command == "ablate":
        run_experiment_table("구성요소 어블레이션", runner.ablate(seeds=args.seeds))
    elif args.command == "efficiency":
        print(runner.efficiency(batch_size=args.batch_size).get_summary())


def main(argv: Optional[Sequence[str]] = None) -> int:
    """메인 함수 (종료 코드 반환)"""
    parser = create_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    try:
        settings = Settings.from_env(args.env)
        setup_logging(settings.log_level)
        dispatch(args, settings)
    except (ConfigError, DataFormatError, FileNotFoundError) as e:
        logger.error(f"설정 / 입력 오류: {e}")
        print(f"설정 / 입력 오류: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RoDPOError as e:
        logger.error(f"실행 오류: {e}")
        print(f"실행 오류: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
