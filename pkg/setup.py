from setuptools import setup, find_packages

setup(
  name="formflow",
  version="0.1.0",
  packages=find_packages(exclude=["example", "example.*"]),
  package_data={"formflow": ["data/*.json", "schemas/*.json"]},
  install_requires=[
        'numpy>=1.24',
        'jsonschema>=4.18',
        'jsonpath-ng>=1.5.3',
    ],
  entry_points={
        "console_scripts": ["formflow=formflow.core.cli:main"],
    },
  description="Closure and commutator analysis of skew-symmetric differential forms, with thermodynamic, gas-dynamic and electromagnetic scenarios.",
  long_description=open('README.md').read(),
    long_description_content_type="text/markdown",
  classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
  python_requires='>=3.9',
)
