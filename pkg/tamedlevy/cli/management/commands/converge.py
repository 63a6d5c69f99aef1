from tamedlevy.cli.commands import RunCommand
from tamedlevy.cli.models import Command as RunKind


class Command(RunCommand):
    help = "Estimate strong L^q errors and fit convergence rates."
    command = RunKind.CONVERGE
