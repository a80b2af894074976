from setuptools import setup, find_packages

setup(
    name="heisenberg_residue",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
    ],
    entry_points={
        'console_scripts': [
            'analyze-residue=src.analyze_residue:main',
        ],
    },
    python_requires='>=3.8',
    author="Justin Crisafulli",
    description="Noncommutative residues of Heisenberg pseudodifferential projections",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
)
