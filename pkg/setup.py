from setuptools import setup, find_packages

setup(
    name="popcorn_dimension",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    python_requires=">=3.9",
    install_requires=[
        'numpy==1.26.4',
        'scipy==1.12.0',
        'matplotlib==3.8.3',
        'python-dotenv==1.0.0',
        'Pillow==10.2.0',
    ],
    entry_points={
        'console_scripts': [
            'popcorn-dim=popcorn_dimension.cli:main',
        ],
    },
)
