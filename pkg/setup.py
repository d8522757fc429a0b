#!/usr/bin/env python3

from setuptools import setup, find_packages
import os
import subprocess


def get_version():
    base_dir = os.path.dirname(__file__)

    __version__ = None
    try:
        update_script = os.path.join(base_dir, 'admin', 'update_version.py.sh')
        __version__ = subprocess.check_output([update_script]).decode('utf-8').strip()
    except:
        pass

    if __version__ is None:
        version_file = os.path.join(base_dir, 'landaulab', '_version.py')
        with open(version_file, 'r') as version_in:
            exec(version_in.read())

    return __version__


setup(name='landaulab',
      version=get_version(),
      description='Spectral Vlasov-Poisson laboratory: Landau damping, Penrose stability and plasma echoes',
      license='MIT',
      packages=find_packages(),
      entry_points = {
          'console_scripts': [
              'landau-lab=landaulab.labrun:main',
          ]
      },
      package_data={
          'landaulab': ['config/*.yaml'],
      },
      python_requires='>=3.9',
      install_requires=[
          'PyYAML',
          'numpy>=1.22',
          'scipy>=1.9',
          'numba>=0.56',
      ],
#      For now tests can be run manually with pytest
#      setup_requires=['pytest-runner'],
#      tests_require=['pytest'],
)
