from tamedlevy.cli.commands import RunCommand
from tamedlevy.cli.models import Command as RunKind


class Command(RunCommand):
    help = "Run the structural checks on a problem."
    command = RunKind.CHECK
