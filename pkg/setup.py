from setuptools import find_packages, setup

setup(
    name="causal-distances",
    version="0.1.0",
    packages=find_packages(include=["src", "src.*"]),
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "networkx>=3.0",
        "pandas>=2.0",
        "typer>=0.9.0",
        "rich>=13.5.2",
        "python-dotenv>=1.0.0",
    ],
    entry_points={"console_scripts": ["causal-dist=src.cli:main"]},
    python_requires=">=3.9",
)
