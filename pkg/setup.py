from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="wpc",
    version="1.0.0",
    author="WPC Team",
    description="Caractérisation de charge multi-niveaux (IR, ISA, microarchitecture) pilotée par traces et charges de référence",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["examples", "examples.*"]),
    package_data={"wpc": ["templates/*.j2"]},
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: System :: Benchmark",
    ],
    python_requires=">=3.9",
    install_requires=[
        "pydantic>=2.5.0",
        "python-dotenv>=1.0.0",
        "structlog>=23.2.0",
        "numpy>=1.26.0",
        "scipy>=1.11.0",
        "pandas>=2.1.0",
        "jinja2>=3.1.2",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4.3",
            "pytest-cov>=4.1.0",
            "pytest-mock>=3.12.0",
            "hypothesis>=6.92.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "wpc=wpc.main:main",
        ],
    },
)
