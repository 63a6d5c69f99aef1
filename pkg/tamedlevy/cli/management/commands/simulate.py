from tamedlevy.cli.commands import RunCommand
from tamedlevy.cli.models import Command as RunKind


class Command(RunCommand):
    help = "Simulate paths on several levels driven by shared noise."
    command = RunKind.SIMULATE
