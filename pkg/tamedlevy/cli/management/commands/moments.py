from tamedlevy.cli.commands import RunCommand
from tamedlevy.cli.models import Command as RunKind


class Command(RunCommand):
    help = "Estimate the p-th moment of each path's grid maximum."
    command = RunKind.MOMENTS
