from setuptools import setup, find_packages
from setuptools.command.install import install
from pathlib import Path
import pkg_resources

class PostInstallCommand(install):
    """Post-installation for installation mode."""
    def run(self):
        install.run(self)
        self._post_install()

    def _post_install(self):
        from rich.console import Console
        from rich.markdown import Markdown

        from asymlab.config import seed_user_defaults

        # Seed ~/.asymlab/defaults.yaml from the bundled example
        defaults_yaml = seed_user_defaults()
        if defaults_yaml is not None:
            console = Console()
            console.print(Markdown(f"[{defaults_yaml}]({defaults_yaml}) created with the default tolerances."))
            console.print(Markdown("Edit it to change the tolerances every `asymlab run` starts from."))


setup(
    name='asymlab',
    version='0.1',
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    package_data={"asymlab": ["templates/*.j2", "templates/*.yaml"]},
    description="Barriers, solvers and removability experiments for quasi-linear elliptic operators on hyperbolic space",
    long_description=open("README.md", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    readme="README.md",
    python_requires=">=3.10",
    license="MIT",
    entry_points={
        "console_scripts": ["asymlab=asymlab.main:cli",],
    },
    install_requires=[
        str(r)
        for r in pkg_resources.parse_requirements(
            Path(__file__).with_name("requirements.txt").open()
        )
    ],
    extras_require={
        "test": ["pytest"],
    },
    cmdclass={
        'install': PostInstallCommand,
    },

)
