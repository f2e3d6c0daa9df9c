from setuptools import setup

setup(
    name='CosmoTime',
    version="0.1",
    description="Cosmological time, level surfaces and initial singularities of flat regular domains",
    author=' ',
    author_email='',
    packages=['CosmoTime'],
    install_requires=['numpy', 'scipy', 'tqdm'],
    entry_points={'console_scripts': ['cosmotime=CosmoTime.cli:main']},
)
