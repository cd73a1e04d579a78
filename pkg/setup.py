# Copyright (c) 2026 The pycanoa developers
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN
# THE SOFTWARE.

from setuptools import setup, find_packages


VERSION = __import__("pycanoa").__version__


setup(
    name="pycanoa",
    version = VERSION,
    author="The pycanoa developers",
    url="https://github.com/pycanoa/pycanoa",
    description="""CAN sender authentication from ECU power traces""",
    packages=find_packages(exclude=["tests"]),
    namespace_packages = [],
    include_package_data = True,
    zip_safe=False,
    license="MIT",
    python_requires=">=3.8",
    install_requires=["numpy", "scipy", "simplejson"],
    tests_require=["pytest", "mock"],
    entry_points={
        'console_scripts': ['canoa = pycanoa.cli:main'],
    },
)
