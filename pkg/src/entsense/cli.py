#!/usr/bin/env python3

import argparse
import json
import logging
import sys
import textwrap
import traceback
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import argcomplete
from argcomplete.completers import FilesCompleter

from . import __version__
from .candidates import AmbiguousEntity, candidate_count_stats
from .config import PipelineConfig
from .errors import EntsenseError, InputError
from .evaluation import (
    ALL_PLATFORMS,
    agreement_stats,
    alpha_sweep,
    ambiguity_stats,
    evaluate,
    format_grid,
    format_sweep,
    load_gold,
    write_grid_tsv,
    write_report_json,
)
from .identity import (
    apply_verification,
    bridge_report,
    format_bridge_report,
    load_usernames,
    match_usernames,
)
from .ingest import run_ingest
from .interest import coverage_profile, dump_user_model
from .pipeline import Pipeline
from .records import numbered_lines
from .similarity import RankedResult
from .text import load_utterances

SUBCOMMANDS = ('ingest', 'build-model', 'resolve', 'evaluate', 'stats', 'sweep-alpha', 'bridge')


def setup_logging(debug: bool = False) -> None:
    """Send ``LEVEL: message`` lines to stderr, DEBUG and up with --debug."""
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.WARNING,
        format='%(levelname)s: %(message)s',
        stream=sys.stderr,
        force=True,
    )


def load_config(args: argparse.Namespace) -> PipelineConfig:
    """Load --config, or the per-user default created on first run."""
    if args.config:
        config = PipelineConfig.load(args.config)
    else:
        # Initialize configuration on CLI execution (not on import)
        from .init import initialize_entsense
        config = PipelineConfig.load(initialize_entsense())
    overrides: Dict = {}
    if getattr(args, 'alpha', None) is not None:
        overrides.setdefault('ranking', {})['alpha'] = args.alpha
    if getattr(args, 'output_dir', None):
        overrides.setdefault('paths', {})['output_dir'] = str(Path(args.output_dir).resolve())
    return config.with_overrides(overrides) if overrides else config


def display_config(config: PipelineConfig) -> None:
    """Print the effective configuration."""
    print("Current Configuration:")
    print(textwrap.indent(config.dump(), '  '), end='')


def ranking_record(result: RankedResult) -> Dict:
    entity = result.entity
    return {
        'utterance_id': entity.utterance_id,
        'entity_id': entity.key,
        'surface': entity.surface,
        'candidates': [
            {
                'topic': r.topic_id,
                'sim_content': r.scores.sim_content,
                'sim_category': r.scores.sim_category,
                'combined': r.scores.combined,
            }
            for r in result.ranked
        ],
    }


def cmd_ingest(config: PipelineConfig, args: argparse.Namespace) -> None:
    result = run_ingest(config)
    print(f"Ingested {len(result.users)} users into {config.output_dir}")
    print(f"  Topics: {result.topics}")
    print(f"  Categories: {result.categories}")
    print(f"  Edits: {result.edits}")
    print(f"  Utterances: {result.utterances}")
    print(f"  Excluded users: {len(result.exclusions)}")


def cmd_build_model(config: PipelineConfig, args: argparse.Namespace) -> None:
    pipeline = Pipeline(config)
    kb_user = pipeline.require_bridge(args.user, args.platform)
    text = dump_user_model(pipeline.model(kb_user))
    if args.output:
        with open(args.output, 'w', encoding='utf-8') as f:
            f.write(text)
        print(f"Model for {kb_user} written to {args.output}")
    else:
        sys.stdout.write(text)


def cmd_resolve(config: PipelineConfig, args: argparse.Namespace) -> None:
    pipeline = Pipeline(config)
    if args.utterances:
        utterances = load_utterances(args.utterances)
    else:
        utterances = pipeline.utterances
    utterances = [u for u in utterances if u.user_id == args.user]
    platform = utterances[0].platform.value if utterances else 'generic'
    kb_user = pipeline.require_bridge(args.user, platform)
    ranker = pipeline.ranker(kb_user)

    output = Path(args.output) if args.output else config.output_dir / f'rankings-{args.user}.jsonl'
    output.parent.mkdir(parents=True, exist_ok=True)
    results: List[RankedResult] = []
    for u in utterances:
        for entity in pipeline.resolve_entities(u).entities:
            results.append(ranker.rank(entity))
    with open(output, 'w', encoding='utf-8') as f:
        for result in results:
            f.write(json.dumps(ranking_record(result), ensure_ascii=False) + '\n')

    print(f"Resolved {len(results)} entities in {len(utterances)} utterances for {args.user} ({kb_user})")
    for result in results:
        best = result.ranked[0]
        print(f"  {result.entity.utterance_id}\t{result.entity.surface}\t{best.topic_id}\t{best.scores.combined:.4f}")
    print(f"Rankings written to {output}")


def _detected_by_utterance(pipeline: Pipeline) -> Dict[str, List[AmbiguousEntity]]:
    return {u.utterance_id: list(pipeline.resolve_entities(u).detected) for u in pipeline.utterances}


def _run_evaluation(pipeline: Pipeline, config: PipelineConfig):
    gold = load_gold(config.require_path('paths', 'gold'))
    report = evaluate(
        gold,
        {u.utterance_id: u for u in pipeline.utterances},
        pipeline.models(),
        pipeline.author_of,
        pipeline.graph,
        alpha=config.alpha,
        seed_random_candidate=config.seed_random_candidate,
        seed_random_user=config.seed_random_user,
        **pipeline.ranking_options(),
    )
    return gold, report


def cmd_evaluate(config: PipelineConfig, args: argparse.Namespace) -> None:
    pipeline = Pipeline(config)
    gold, report = _run_evaluation(pipeline, config)
    report.sweep = alpha_sweep(report)
    labelled = [row.annotator_labels for row in gold if len(row.annotator_labels) >= 2]
    if labelled:
        report.agreement = agreement_stats(labelled)
    report.ambiguity = ambiguity_stats(pipeline.utterances, _detected_by_utterance(pipeline))

    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    write_grid_tsv(report, out_dir / 'eval-grid.tsv')
    write_report_json(report, out_dir / 'eval-report.json')

    total = report.grid['interest'][ALL_PLATFORMS].total
    print(f"Evaluated {total} entities ({report.excluded} excluded, {report.skipped} skipped), alpha={report.alpha}")
    print(format_grid(report), end='')
    if report.agreement is not None:
        print(f"Annotator agreement: {report.agreement.observed:.3f} (Fleiss kappa {report.agreement.kappa:.3f})")
    print(f"Report written to {out_dir}")


def cmd_sweep_alpha(config: PipelineConfig, args: argparse.Namespace) -> None:
    pipeline = Pipeline(config)
    _, report = _run_evaluation(pipeline, config)
    sweep = alpha_sweep(report)
    text = format_sweep(sweep)
    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / 'alpha-sweep.tsv', 'w', encoding='utf-8') as f:
        f.write(text)
    print(text, end='')


def cmd_stats(config: PipelineConfig, args: argparse.Namespace) -> None:
    pipeline = Pipeline(config)
    detected = _detected_by_utterance(pipeline)
    report = ambiguity_stats(pipeline.utterances, detected)

    print("Ambiguity:")
    print("  platform\tkind\ttexts\tambiguous texts\tentities\tambiguous entities")
    for row in report.rows:
        print(
            f"  {row.platform}\t{row.kind}\t{row.texts}\t{row.texts_with_ambiguous} ({row.text_rate:.1%})"
            f"\t{row.entities}\t{row.ambiguous_entities} ({row.entity_rate:.1%})"
        )
    counts = report.candidate_counts
    print(
        f"Candidates per ambiguous entity: min {counts['min']}, mean {counts['mean']:.2f}, "
        f"median {counts['median']:.1f}, max {counts['max']}"
    )
    print(f"Top-candidate confidence histogram (10 bins): {list(report.confidence_histogram)}")
    for key, hist in report.length_histograms.items():
        print(f"Text length histogram {key} (10-char bins): {list(hist)}")

    models = pipeline.models()
    by_author: Dict[str, List[AmbiguousEntity]] = {}
    for u in pipeline.utterances:
        author = pipeline.author_of(u)
        if author in models:
            by_author.setdefault(author, []).extend(pipeline.resolve_entities(u).entities)
    if by_author:
        print("Interest coverage by distance:")
        for author in sorted(by_author):
            profile = coverage_profile(models[author], by_author[author], pipeline.graph)
            cells = ', '.join(f"d={d}: {'n/a' if v is None else f'{v:.1%}'}" for d, v in profile.items())
            print(f"  {author}: {cells}")
    stats = candidate_count_stats([e for entities in by_author.values() for e in entities])
    print(f"Filtered entities: {stats.count}")


def cmd_bridge(config: PipelineConfig, args: argparse.Namespace) -> None:
    pipeline = Pipeline(config)
    path = Path(args.usernames) if args.usernames else config.require_path('ingest', 'usernames')
    pairs = load_usernames(path)
    if args.kb:
        kb = {line.strip() for _, line in numbered_lines(args.kb) if line.strip() and not line.startswith('#')}
    else:
        kb = set(pipeline.kb_users)
    results = []
    for platform in sorted({p for _, p in pairs}):
        names = [name for name, p in pairs if p == platform]
        results.extend(match_usernames(names, kb, platform=platform, strict=config.strict_usernames))
    results = apply_verification(results, pipeline.annotations)
    print(format_bridge_report(bridge_report(results)), end='')


COMMANDS = {
    'ingest': cmd_ingest,
    'build-model': cmd_build_model,
    'resolve': cmd_resolve,
    'evaluate': cmd_evaluate,
    'stats': cmd_stats,
    'sweep-alpha': cmd_sweep_alpha,
    'bridge': cmd_bridge,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='entsense',
        description='Disambiguate entities in short social texts using the author\'s knowledge-base interests',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=textwrap.dedent('''
            Examples:
              entsense                                  # show the effective configuration
              entsense -c corpus/config.yaml ingest
              entsense -c corpus/config.yaml build-model tvfan -o tvfan.yaml
              entsense -c corpus/config.yaml resolve tvfan
              entsense -c corpus/config.yaml evaluate --alpha 0.7
              entsense -c corpus/config.yaml bridge usernames.tsv
        ''')
    )
    parser.add_argument('--version', action='store_true', help='Show version information')
    config_arg = parser.add_argument('-c', '--config', help='Configuration file (default ~/.config/entsense/config.yaml)')
    config_arg.completer = FilesCompleter(allowednames=('yaml', 'yml'))
    parser.add_argument('-d', '--debug', action='store_true', help='Enable debug logging')

    sub = parser.add_subparsers(dest='command', metavar='COMMAND')

    p = sub.add_parser('ingest', help='Collect a snapshot bundle from the knowledge-base API')
    p.add_argument('--output-dir', help='Directory for the snapshot files')

    p = sub.add_parser('build-model', help='Build and print a user interest model')
    p.add_argument('user', help='Social or knowledge-base username')
    p.add_argument('--platform', default='generic', help='Platform of the username')
    output_arg = p.add_argument('-o', '--output', help='Write the model to this file')
    output_arg.completer = FilesCompleter()

    p = sub.add_parser('resolve', help='Rank entity candidates in a user\'s utterances')
    p.add_argument('user', help='Social username of the author')
    utterances_arg = p.add_argument('utterances', nargs='?', help='Utterance file (default paths.utterances)')
    utterances_arg.completer = FilesCompleter()
    p.add_argument('-o', '--output', help='Ranking output file')
    p.add_argument('--alpha', type=float, help='Content/category weight in [0, 1]')
    p.add_argument('--output-dir', help='Output directory')

    for name, help_text in (
        ('evaluate', 'P@1 grid, agreement and corpus statistics over the gold set'),
        ('sweep-alpha', 'Interest-method P@1 for alpha in 0.0, 0.1, ..., 1.0'),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument('--alpha', type=float, help='Content/category weight in [0, 1]')
        p.add_argument('--output-dir', help='Output directory')

    sub.add_parser('stats', help='Ambiguity, candidate and interest-coverage statistics')

    p = sub.add_parser('bridge', help='Match social usernames to knowledge-base accounts')
    usernames_arg = p.add_argument('usernames', nargs='?', help='Username file (default ingest.usernames)')
    usernames_arg.completer = FilesCompleter()
    kb_arg = p.add_argument('--kb', help='File of knowledge-base usernames (default: users in the edit history)')
    kb_arg.completer = FilesCompleter()

    return parser


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Main entry point for the entsense command."""
    parser = build_parser()

    # Shell tab completion (no-op unless _ARGCOMPLETE is set by the shell)
    argcomplete.autocomplete(parser)

    args = parser.parse_args(argv)
    setup_logging(args.debug)

    if args.version:
        print(f"entsense {__version__}")
        return

    try:
        config = load_config(args)
        if args.command is None:
            display_config(config)
            return
        COMMANDS[args.command](config, args)
    except EntsenseError as e:
        if args.debug:
            traceback.print_exc()
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    except OSError as e:
        if args.debug:
            traceback.print_exc()
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(InputError.exit_code)


if __name__ == '__main__':
    main()
