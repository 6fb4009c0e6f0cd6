"""Builds the pybind11 extension by delegating to the CMake project."""

import os
import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)
        subprocess.run(
            [
                "cmake",
                "-S",
                str(source_dir),
                "-B",
                str(build_dir),
                "-DCMAKE_BUILD_TYPE=Release",
                f"-DPython3_EXECUTABLE={sys.executable}",
            ],
            check=True,
        )
        subprocess.run(
            [
                "cmake",
                "--build",
                str(build_dir),
                "--target",
                "_core",
                f"-j{os.cpu_count() or 2}",
            ],
            check=True,
        )
        package_dir = Path(self.get_ext_fullpath(ext.name)).resolve().parent
        package_dir.mkdir(parents=True, exist_ok=True)
        for artifact in (build_dir / "python" / "quadfusion").glob("_core*"):
            target = package_dir / artifact.name
            if target != artifact:
                shutil.copy2(artifact, target)


setup(
    ext_modules=[CMakeExtension("quadfusion._core")],
    cmdclass={"build_ext": CMakeBuild},
)
