from setuptools import setup, find_packages

setup(
    name='wedgecp',
    version='0.1',
    packages=find_packages(exclude=['tests', 'examples', 'examples.*']),
    include_package_data=True,
    package_data={'wedgecp': ['data/definitions/*.yaml', 'data/definitions/experiments/*.yaml']},
    python_requires='>=3.9',
    install_requires=[
        'click',
        'pydantic>=2',
        'PyYAML',
        'numpy',
        'scipy',
    ],
    extras_require={
        'test': [
            'pytest',
            'networkx',
        ]
    },
    entry_points='''
        [console_scripts]
        wedgecp=wedgecp.cli:main
    ''',
)
