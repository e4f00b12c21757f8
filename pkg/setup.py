"""Setup script for tradmem"""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="tradmem",
    version="0.1.1",
    description="Layered-memory multi-agent trading desk with reflections, debate and backtesting",
    long_description=long_description,
    long_description_content_type="text/markdown",
    package_dir={"": "src"},
    packages=find_packages(where="src"),
    py_modules=[
        "agent",
        "cli",
        "debate",
        "embedding",
        "errors",
        "market_data",
        "memory_engine",
        "prompt_registry",
        "run_log_manager",
        "storage",
    ],
    data_files=[("prompts", [
        "prompts/train_decision.yaml",
        "prompts/test_decision.yaml",
        "prompts/debate_feedback.yaml",
        "prompts/debate_revision.yaml",
    ])],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Intended Audience :: Financial and Insurance Industry",
        "Topic :: Office/Business :: Financial :: Investment",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
    python_requires=">=3.10",
    install_requires=[
        "pyyaml>=6.0",
        "httpx>=0.25.0",
        "tenacity>=8.0.0",
        "jsonschema>=4.0.0",
        "pydantic>=2.0.0",
        "numpy>=1.24.0",
        "pandas>=2.0.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4.0",
            "pytest-mock>=3.11.0",
            "pytest-cov>=4.1.0",
            "pytest-timeout>=2.1.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "tradmem=cli:main",
        ],
    },
)
