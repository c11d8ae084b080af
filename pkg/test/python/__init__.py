# Python tests for amp_cs
