#!/usr/bin/env python3
"""
Обучение политик землепользования, минимизирующих поверхностный сток (PPO)
Команды: train, evaluate, scenario, print-config, make-seed-grid
"""

import argparse
import logging
import signal
import sys
from pathlib import Path

import psutil

import config
from errors import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, LulcPpoError
from evaluation import compare_all, emit_reports, run_greedy, wetland_conversion_share
from ppo_trainer import CHECKPOINT_NAME, load_policy, train
from raster_io import load_inputs, make_seed_grid, write_grid_csv, write_mask_csv
from rng import XorShift64Star
from runoff import CLASS_NAMES, LulcClass, class_histogram, histogram_runoff
from scenarios import apply_scenario, builtin_scenarios, resolve_scenario
from storage import RunManifest, atomic_write_text

logger = logging.getLogger(__name__)


def signal_handler(sig, frame):
    """Обработчик сигналов для корректного завершения"""
    print('\n🛑 Получен сигнал завершения. Останавливаем запуск...', file=sys.stderr)
    sys.exit(EXIT_RUNTIME)


def u64(value: str) -> int:
    number = int(value, 0)
    if not 0 <= number <= config.U64_MAX:
        raise argparse.ArgumentTypeError(f"seed должен быть 64-битным беззнаковым: {value}")
    return number


def non_negative(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"ожидается неотрицательное число: {value}")
    return number


def positive(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"ожидается положительное число: {value}")
    return number


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, default=config.DEFAULT_CONFIG_PATH,
                        help='YAML-файл конфигурации запуска')
    common.add_argument('--seed', type=u64, help='seed (64-битное беззнаковое)')
    common.add_argument('--out', type=Path, help='каталог для результатов')

    parser = argparse.ArgumentParser(
        prog='lulc-ppo',
        description='Обучение политик изменения землепользования для снижения стока',
    )
    commands = parser.add_subparsers(dest='command', required=True)

    train_parser = commands.add_parser('train', parents=[common], help='обучить политику PPO')
    train_parser.add_argument('--workers', type=positive, help='число процессов сбора роллаутов')
    train_parser.add_argument('--updates', type=non_negative, help='число обновлений PPO')

    evaluate_parser = commands.add_parser('evaluate', parents=[common],
                                          help='сравнить сток и построить матрицу переходов')
    evaluate_parser.add_argument('--checkpoint', type=Path, help='путь к чекпоинту')
    evaluate_parser.add_argument('--steps', type=non_negative, help='шагов жадного прохода')
    evaluate_parser.add_argument('--sample', action='store_true',
                                 help='сэмплировать действия вместо argmax')

    scenario_parser = commands.add_parser('scenario', parents=[common],
                                          help='применить сценарий s1..s5 или CSV-файл')
    scenario_parser.add_argument('scenario_id', help='s1..s5 или путь к CSV сценария')

    commands.add_parser('print-config', parents=[common], help='вывести итоговую конфигурацию')
    commands.add_parser('make-seed-grid', parents=[common], help='записать встроенную сетку в CSV')
    return parser


def load_config(args) -> config.RunConfig:
    cfg = config.load_run_config(args.config)
    return config.apply_overrides(
        cfg,
        seed=args.seed,
        out=args.out,
        workers=getattr(args, 'workers', None),
        updates=getattr(args, 'updates', None),
    )


def cmd_train(args) -> int:
    cfg = load_config(args)
    cpu_count = psutil.cpu_count(logical=True) or 1
    if cfg.ppo.workers > cpu_count:
        logger.warning(f"Воркеров ({cfg.ppo.workers}) больше, чем CPU ({cpu_count})")

    grid, table = load_inputs(cfg)
    out_dir = cfg.output.directory
    manifest = RunManifest('train', cfg.snapshot(), cfg.seed)
    for path in cfg.input_paths():
        manifest.add_input(path)

    print(f"🚀 Обучение: {cfg.ppo.total_updates} обновлений, сетка {grid.width}x{grid.height}, "
          f"seed {cfg.seed}")
    checkpoint_path, history = train(cfg, grid, table)
    manifest.add_output(checkpoint_path)
    manifest.add_output(out_dir / 'stats.csv')
    manifest.extra['updates'] = len(history)
    manifest.write(out_dir / 'train_manifest.json')

    print(f"✅ Чекпоинт: {checkpoint_path}")
    if history:
        last = history[-1]
        print(f"📊 Последнее обновление: награда {last.mean_reward:.4f}, "
              f"сток {last.final_episode_runoff_m3_per_s:.6f} м³/с")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = load_config(args)
    out_dir = cfg.output.directory
    checkpoint_path = args.checkpoint or out_dir / CHECKPOINT_NAME
    actor, _, document = load_policy(checkpoint_path, cfg.ppo.hidden_sizes)
    grid, table = load_inputs(cfg)

    manifest = RunManifest('evaluate', cfg.snapshot(), cfg.seed)
    for path in [*cfg.input_paths(), checkpoint_path]:
        manifest.add_input(path)

    report = compare_all(grid, builtin_scenarios(), actor, table, cfg.env)
    steps = grid.pixel_count if args.steps is None else args.steps
    rng = XorShift64Star.from_state(document['rng_state']['master']) if args.sample else None
    final_grid, matrix, runoff = run_greedy(grid, actor, steps, cfg.env, table, rng)

    for path in emit_reports(report, matrix, out_dir, final_grid):
        manifest.add_output(path)
    share = wetland_conversion_share(grid, final_grid)
    manifest.extra.update({
        'steps': steps,
        'sampled': bool(args.sample),
        'optimized_is_minimum': report.optimized_is_minimum,
        'final_histogram': class_histogram(final_grid).as_dict(),
        'final_runoff_m3_per_s': runoff.total_m3_per_s,
        'wetland_conversion_share': share,
    })
    manifest.write(out_dir / 'evaluate_manifest.json')

    print("📊 Сравнение стока, м³/с:")
    for label, value in report.entries:
        print(f"   {label:<10} {value:.6f}")
    status = "✅" if report.optimized_is_minimum else "⚠️ "
    print(f"{status} Оптимизированный сток является строгим минимумом: {report.optimized_is_minimum}")
    print(f"🌿 Доля незамороженных пикселей → wetland: {share:.3f} ({steps} шагов)")
    print(f"📁 Отчеты: {out_dir}")
    return EXIT_OK


def cmd_scenario(args) -> int:
    cfg = load_config(args)
    grid, table = load_inputs(cfg)
    scenario = resolve_scenario(args.scenario_id)
    report = apply_scenario(class_histogram(grid), scenario)
    before = histogram_runoff(report.before, table, grid.cell_area_m2)
    after = histogram_runoff(report.after, table, grid.cell_area_m2)

    print(f"🗺  Сценарий {scenario.name}")
    print(f"   {'класс':<12} {'до':>6} {'цель':>6} {'после':>6}")
    for lulc_class in LulcClass:
        print(f"   {lulc_class.label:<12} {report.before[lulc_class]:>6} "
              f"{report.targets[lulc_class]:>6} {report.after[lulc_class]:>6}")
    assigned = report.residual_assigned_to.label if report.residual_assigned_to is not None else 'нет'
    print(f"   остаток: {report.residual} → {assigned}")
    print(f"💧 Сток: {before.total_m3_per_s:.6f} → {after.total_m3_per_s:.6f} м³/с")

    lines = ['class,before,target,after,runoff_before_m3_per_s,runoff_after_m3_per_s']
    for index, name in enumerate(CLASS_NAMES):
        lines.append(f"{name},{report.before.counts[index]},{report.targets[index]},"
                     f"{report.after.counts[index]},{before.per_class_m3_per_s[index]!r},"
                     f"{after.per_class_m3_per_s[index]!r}")
    lines.append(f"total,{report.before.total},{sum(report.targets)},{report.after.total},"
                 f"{before.total_m3_per_s!r},{after.total_m3_per_s!r}")
    path = atomic_write_text(cfg.output.directory / f"scenario_{scenario.name}.csv", "\n".join(lines) + "\n")
    print(f"📁 {path}")
    return EXIT_OK


def cmd_print_config(args) -> int:
    cfg = load_config(args)
    print(cfg.to_yaml(), end='')
    return EXIT_OK


def cmd_make_seed_grid(args) -> int:
    cfg = load_config(args)
    grid = make_seed_grid(cfg.env.frozen_class_set())
    out_dir = cfg.output.directory
    grid_path = write_grid_csv(grid, out_dir / 'seed_grid.csv')
    mask_path = write_mask_csv(grid, out_dir / 'seed_frozen.csv')
    hist = class_histogram(grid)
    print(f"✅ Сетка {grid.width}x{grid.height}: {grid_path}")
    print(f"🧊 Маска заморозки ({int(grid.frozen.sum())} пикселей): {mask_path}")
    for name, count in hist.as_dict().items():
        print(f"   {name:<12} {count}")
    return EXIT_OK


COMMANDS = {
    'train': cmd_train,
    'evaluate': cmd_evaluate,
    'scenario': cmd_scenario,
    'print-config': cmd_print_config,
    'make-seed-grid': cmd_make_seed_grid,
}


def main(argv=None) -> int:
    """Главная функция"""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse завершает работу сам: --help дает 0, ошибка аргументов 2
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG
    config.setup_logging()

    signal.signal(signal.SIGTERM, signal_handler)

    try:
        return COMMANDS[args.command](args)
    except LulcPpoError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error(f"Ошибка ввода-вывода: {e}")
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("\n🛑 Запуск остановлен пользователем", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception("Критическая ошибка")
        print(f"❌ Критическая ошибка: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
