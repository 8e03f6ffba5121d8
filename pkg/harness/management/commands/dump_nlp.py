import json
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from core.exceptions import OpfError
from formulation.builder import CENTRAL, assemble_nlp
from network.loader import load_case


class Command(BaseCommand):
    help = "Writes the NLP of one scope (central, an AC region id or the MTDC id) as a JSON debug dump."

    def add_arguments(self, parser):
        parser.add_argument('--case', required=True)
        parser.add_argument('--scope', default=CENTRAL)
        parser.add_argument('--out', help="Output file; stdout when omitted.")

    def handle(self, *args, **options):
        try:
            problem = assemble_nlp(load_case(options['case']), options['scope'])
        except OpfError as exc:
            raise CommandError(str(exc), returncode=1)
        dump = json.dumps(problem.describe(), indent=2)
        if options['out']:
            Path(options['out']).write_text(dump)
            self.stdout.write(self.style.SUCCESS(f"Wrote {problem.n} variables to {options['out']}"))
        else:
            self.stdout.write(dump)
