from setuptools import setup, find_packages

setup(
    name="steelflex",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    package_data={"steelflex": ["data/*.json", "data/*.csv", "data/history/*.csv"]},
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24",
        "pandas>=2.0",
        "pyomo>=6.7",
        "highspy>=1.7",
        "pydantic>=2.5",
        "python-dotenv>=1.0.0",
    ],
    extras_require={
        "test": ["pytest>=7.4"],
    },
    entry_points={
        "console_scripts": ["steelflex=steelflex.main:main"],
    },
)
