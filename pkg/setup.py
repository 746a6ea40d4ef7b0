"""
GridGenius Package Setup Configuration
Stability-constrained online feedback optimization toolkit
"""

from setuptools import setup, find_packages
import os
from pathlib import Path

# Read the README file for long description
this_directory = Path(__file__).parent
long_description = (this_directory / "README.md").read_text(encoding='utf-8') if (this_directory / "README.md").exists() else ""

# Read requirements from requirements.txt (runtime group only)
requirements = []
if os.path.exists('requirements.txt'):
    with open('requirements.txt', 'r', encoding='utf-8') as f:
        for line in f:
            line = line.strip()
            if line.startswith('# Development Dependencies'):
                break
            if line and not line.startswith('#'):
                requirements.append(line)

setup(
    name="gridgenius",
    version="1.0.0",
    author="GridGenius Team",
    author_email="",
    description="Small-signal-stability-constrained online feedback optimization for power networks",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=['tests*', 'build*', 'dist*']),
    package_data={
        'gridgenius': [
            'assets/*.yaml',
        ],
    },
    include_package_data=True,
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Operating System :: OS Independent",
    ],
    keywords="power systems, optimal power flow, feedback optimization, small-signal stability, MARS",
    python_requires=">=3.9",
    install_requires=requirements,
    extras_require={
        'dev': [
            'pytest>=7.4.0',
            'pytest-cov>=4.1.0',
            'black>=23.7.0',
            'flake8>=6.0.0',
            'mypy>=1.5.0',
        ],
    },
    entry_points={
        'console_scripts': [
            'gridgenius=gridgenius.cli.main_cli:main',
        ],
    },
    zip_safe=False,
    platforms=['any'],
    license='MIT',
    license_files=['LICENSE'] if os.path.exists('LICENSE') else [],
)
