from setuptools import setup

setup(
    name="rfrsabr",
    version="0.1.0",
    description="Backward-looking SABR caplet pricing for overnight-rate term rates",
    packages=["rfrsabr", "utils"],
    py_modules=["main"],
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "pandas>=1.5",
        "python-dotenv>=0.19",
    ],
    extras_require={"test": ["pytest>=7", "hypothesis>=6"]},
    entry_points={"console_scripts": ["rfrsabr=main:main"]},
)
